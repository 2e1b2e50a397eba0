#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctwin/nn/layers.hpp"
#include "ctwin/ofdm/ofdm.hpp"
#include "ctwin/precode/precode.hpp"
#include "ctwin/twin/corrector.hpp"
#include "ctwin/twin/dataset.hpp"

namespace ctwin::harness {

// The three study shapes: BER vs ray-count fidelity, BER vs material choice,
// and BER/NMSE with the trained corrector in the loop.
enum class Scenario { ray_count_study, material_study, corrector_study };

std::string to_string(Scenario s);

// One transmit-CSI variant of a sweep. The dataset supplies both channel
// sides: its truth CIRs always drive propagation; the estimate the precoder
// sees is the truth side (use_truth, the genie variant), the corrected twin
// (checkpoint_path set), or the raw twin side (otherwise).
struct VariantSource {
    std::string label;           // CSV series label; no commas/newlines
    std::string dataset_path;    // paired-CIR dataset file
    std::string checkpoint_path; // optional model applied to the twin side
    bool use_truth = false;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::ray_count_study;
    std::vector<double> snr_grid_db;
    std::size_t trials = 25;           // Monte-Carlo trials (positions) per point
    std::size_t frames_per_trial = 16; // OFDM frames per trial
    std::vector<precode::PrecoderMode> precoders{precode::PrecoderMode::mmse};
    precode::Normalization normalization = precode::Normalization::raw;
    std::vector<std::size_t> fidelity_tiers{1000, 10000, 100000};
    std::vector<std::size_t> desk_tiers{100, 1000, 10000}; // quick alternative
    std::string material_choice = "MC1";
    std::uint64_t base_seed = 1;
    bool noise_enabled = true; // off: exact zero-noise runs for exactness checks
    std::string output_csv;    // empty: results are returned but not persisted
    std::string output_svg;    // empty: no plot emitted by the sweep
    ofdm::OfdmConfig ofdm;     // N_s=128, tau=16, F_s=30.72 MHz, QPSK defaults
    std::size_t antenna_count = 4;
    double learning_rate = 8.0e-4; // corrector training step size (xi)
    double split = 0.7;            // train fraction of paired datasets
    std::vector<VariantSource> variants;

    void validate() const; // throws dimension_error on violated invariants
};

// Study defaults: QPSK over 128 subcarriers with a 16-sample cyclic prefix at
// 30.72 MHz, 4 transmit antennas, zero-forcing detection, corrector step size
// 8e-4, 70/30 split, fidelity tiers {1e3,1e4,1e5} (desk tiers {1e2,1e3,1e4}).
// The ray-count study sweeps both precoders; the other studies use MMSE only.
ExperimentConfig scenario_defaults(Scenario scenario = Scenario::ray_count_study);

// One aggregated Monte-Carlo point.
struct ResultRow {
    std::string scenario;
    std::string variant;
    double snr_db = 0.0;
    double ber = 0.0;
    std::uint64_t bits = 0;
    double std_err = 0.0; // sqrt(ber*(1-ber)/bits)
    std::uint64_t seed = 0;

    void validate() const; // ber in [0,1], std_err consistent, labels comma-free
};

// Per-point seed: base ^ fnv1a("scenario|snr|variant"), so every (scenario,
// SNR, variant) triple draws an independent reproducible stream and the CSV
// resume key (scenario, snr_db, seed) is complete.
std::uint64_t point_seed(std::uint64_t base_seed, const std::string &scenario, double snr_db,
                         const std::string &variant);

// --- results CSV ("# ctwin-results v1"; columns scenario,variant,snr_db,ber,
// --- bits,stderr,seed; doubles printed with %.17g so parsing round-trips) ---

std::string csv_header();
std::string csv_line(const ResultRow &row);

// Parses a results CSV; malformed content raises numeric_error naming the
// 1-based line number. A missing file raises numeric_error naming the path.
std::vector<ResultRow> read_results_csv(const std::string &path);

// Serialized appender: creates the file with its header when absent, writes
// each row as one flushed line so no partial row is ever visible.
class CsvAppender {
  public:
    explicit CsvAppender(const std::string &path);
    void append(const ResultRow &row);

  private:
    std::string path_;
};

// --- channel assembly -------------------------------------------------------

// Groups a dataset's realizations (position-major, antenna-minor) into one
// multi-antenna CIR per position. truth_side selects the measured/oracle CIRs;
// otherwise the ray-traced twin CIRs are taken.
std::vector<ofdm::Cir> positions_from_dataset(const twin::Dataset &ds, bool truth_side);

// Twin CIRs passed through the trained corrector, grouped the same way. The
// output stays in the dataset's stored (scaled) units so all variants share
// one normalization.
std::vector<ofdm::Cir> corrected_positions(const twin::Dataset &ds, const nn::ModelParams &params);

// One common scale factor g such that after multiplying every tap by g the
// mean per-antenna tap energy sum_i |h_i|^2 over the set is 1. Derived from
// the truth side once per sweep and applied to every variant, so transmit-CSI
// error, not absolute path loss, is what the SNR axis measures.
double channel_normalization(const std::vector<ofdm::Cir> &truth);

void scale_cirs(std::vector<ofdm::Cir> &cirs, double factor);

// --- Monte-Carlo ------------------------------------------------------------

struct BerPoint {
    double ber = 0.0;
    std::uint64_t bits = 0;
    double std_err = 0.0;
};

// One sweep point: cycles trials over positions, precodes with the estimate
// CSI, propagates through the truth CIR with AWGN at snr_db (snr = 1/noise
// variance), equalizes with the true effective channel, accumulates bit
// errors. The MMSE regularizer uses 1/P_t = noise variance at the operating
// point. Deterministic in (inputs, seed).
BerPoint simulate_point(const std::vector<ofdm::Cir> &estimate, const std::vector<ofdm::Cir> &truth,
                        precode::PrecoderMode mode, precode::Normalization norm, double snr_db,
                        bool noise_enabled, std::size_t trials, std::size_t frames_per_trial,
                        const ofdm::OfdmConfig &cfg, std::uint64_t seed);

struct SweepOutcome {
    std::vector<ResultRow> rows; // full grid in deterministic order
    std::size_t computed = 0;    // points simulated this invocation
    std::size_t skipped = 0;     // points reused from the CSV (resume)
};

// Runs the configured grid (SNR outer, variant inner, precoder suffix when
// several are configured). Points already present in output_csv under the
// (scenario, snr_db, seed) key are skipped, so an interrupted sweep resumes
// to the same row set and a duplicate invocation leaves the file bytes
// untouched. Points are computed concurrently; appends stay serialized in
// grid order through one CsvAppender. Missing artifacts raise errors naming
// the offending path.
SweepOutcome run_ber_sweep(const ExperimentConfig &cfg);

// --- NMSE report ------------------------------------------------------------

struct NmseReport {
    twin::CaseReport cases;
    std::string table; // human-readable two-row table
};

// Case 1 (uncorrected twin) and Case 2 (corrected) NMSE over the dataset's
// held-out split, via the checkpoint's recorded training provenance. If the
// checkpoint was trained on a different dataset identity (seed, split, or
// realization count), its training indices could overlap this dataset's test
// split, so the report aborts with state_error. Untrained checkpoints (zeroed
// provenance) are accepted. The table also prints the published full-scale
// reference values (Case 1 = 8.2392 dB, Case 2 = -21.2773 dB) for comparison
// only; nothing is asserted against them. csv_out, when set, receives a small
// "# ctwin-nmse v1" CSV written atomically.
NmseReport run_nmse_report(const std::string &dataset_path, const std::string &checkpoint_path,
                           const std::string &csv_out = std::string());

// --- plotting ---------------------------------------------------------------

// Deterministic SVG: BER (log scale) vs SNR in dB, one polyline per variant
// label (sorted), fixed palette, decade grid lines. BER values below 1e-7
// (including exact zeros) are clamped to the 1e-7 floor for plotting. Empty
// input renders axes only.
std::string render_plot_svg(const std::vector<ResultRow> &rows);

// read_results_csv + render_plot_svg + atomic write.
void emit_plot(const std::string &csv_path, const std::string &svg_path);

} // namespace ctwin::harness
