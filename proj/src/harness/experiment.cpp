#include "ctwin/harness/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctwin/io_util.hpp"
#include "ctwin/nn/checkpoint.hpp"
#include "ctwin/rng.hpp"

namespace ctwin::harness {

namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_label(const std::string &label, const std::string &what) {
    if (label.empty())
        throw dimension_error(what + ": label must not be empty");
    if (label.find_first_of(",\n\r") != std::string::npos)
        throw dimension_error(what + ": label \"" + label + "\" must not contain commas or newlines");
}

} // namespace

std::string to_string(Scenario s) {
    switch (s) {
    case Scenario::ray_count_study:
        return "ray_count_study";
    case Scenario::material_study:
        return "material_study";
    case Scenario::corrector_study:
        return "corrector_study";
    }
    throw dimension_error("unknown scenario value");
}

void ExperimentConfig::validate() const {
    if (snr_grid_db.empty())
        throw dimension_error("experiment config: snr grid must not be empty");
    for (double s : snr_grid_db)
        if (!std::isfinite(s))
            throw dimension_error("experiment config: snr grid entries must be finite");
    if (trials < 1)
        throw dimension_error("experiment config: trials must be at least 1");
    if (frames_per_trial < 1)
        throw dimension_error("experiment config: frames per trial must be at least 1");
    if (precoders.empty())
        throw dimension_error("experiment config: at least one precoder mode required");
    if (antenna_count < 1)
        throw dimension_error("experiment config: antenna count must be at least 1");
    if (!(split > 0.0 && split < 1.0))
        throw dimension_error("experiment config: split must lie strictly between 0 and 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw dimension_error("experiment config: learning rate must be finite and non-negative");
    ofdm.validate();
    for (std::size_t i = 0; i < variants.size(); ++i) {
        check_label(variants[i].label, "experiment config variant");
        for (std::size_t j = i + 1; j < variants.size(); ++j)
            if (variants[i].label == variants[j].label)
                throw dimension_error("experiment config: duplicate variant label \"" + variants[i].label + "\"");
    }
}

ExperimentConfig scenario_defaults(Scenario scenario) {
    ExperimentConfig cfg;
    cfg.scenario = scenario;
    cfg.snr_grid_db = {0.0, 4.0, 8.0, 12.0, 16.0, 20.0};
    cfg.trials = 25;
    cfg.frames_per_trial = 16; // 25*16*128*2 = 102400 bits per point
    cfg.precoders = scenario == Scenario::ray_count_study
                        ? std::vector<precode::PrecoderMode>{precode::PrecoderMode::mrt, precode::PrecoderMode::mmse}
                        : std::vector<precode::PrecoderMode>{precode::PrecoderMode::mmse};
    cfg.normalization = precode::Normalization::raw;
    cfg.fidelity_tiers = {1000, 10000, 100000};
    cfg.desk_tiers = {100, 1000, 10000};
    cfg.material_choice = "MC1";
    cfg.base_seed = 1;
    cfg.ofdm = ofdm::OfdmConfig{}; // 128 subcarriers, 16-sample CP, 30.72 MHz, QPSK
    cfg.antenna_count = 4;
    cfg.learning_rate = 8.0e-4;
    cfg.split = 0.7;
    return cfg;
}

void ResultRow::validate() const {
    check_label(scenario, "result row scenario");
    check_label(variant, "result row variant");
    if (!std::isfinite(snr_db))
        throw numeric_error("result row: snr must be finite");
    if (!(ber >= 0.0 && ber <= 1.0))
        throw numeric_error("result row: ber must lie in [0, 1]");
    if (bits == 0)
        throw numeric_error("result row: bit count must be positive");
    const double expected = std::sqrt(ber * (1.0 - ber) / static_cast<double>(bits));
    if (std_err != expected)
        throw numeric_error("result row: standard error does not match sqrt(ber*(1-ber)/bits)");
}

std::uint64_t point_seed(std::uint64_t base_seed, const std::string &scenario, double snr_db,
                         const std::string &variant) {
    return base_seed ^ fnv1a(scenario + "|" + fmt_g17(snr_db) + "|" + variant);
}

// --- results CSV ------------------------------------------------------------

std::string csv_header() {
    return "# ctwin-results v1\nscenario,variant,snr_db,ber,bits,stderr,seed\n";
}

std::string csv_line(const ResultRow &row) {
    row.validate();
    std::ostringstream os;
    os << row.scenario << ',' << row.variant << ',' << fmt_g17(row.snr_db) << ',' << fmt_g17(row.ber) << ','
       << row.bits << ',' << fmt_g17(row.std_err) << ',' << row.seed << '\n';
    return os.str();
}

namespace {

std::vector<std::string> split_fields(const std::string &line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double(const std::string &s, const std::string &where) {
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw numeric_error(where + ": cannot parse number \"" + s + "\"");
    return v;
}

std::uint64_t parse_u64(const std::string &s, const std::string &where) {
    char *end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size())
        throw numeric_error(where + ": cannot parse integer \"" + s + "\"");
    return static_cast<std::uint64_t>(v);
}

} // namespace

std::vector<ResultRow> read_results_csv(const std::string &path) {
    std::ifstream is(path);
    if (!is)
        throw numeric_error("cannot open results file: " + path);
    std::vector<ResultRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        if (line.rfind("scenario,", 0) == 0)
            continue; // column header
        const std::string where = path + " line " + std::to_string(lineno);
        const std::vector<std::string> f = split_fields(line);
        if (f.size() != 7)
            throw numeric_error(where + ": expected 7 fields, found " + std::to_string(f.size()));
        ResultRow row;
        row.scenario = f[0];
        row.variant = f[1];
        row.snr_db = parse_double(f[2], where);
        row.ber = parse_double(f[3], where);
        row.bits = parse_u64(f[4], where);
        row.std_err = parse_double(f[5], where);
        row.seed = parse_u64(f[6], where);
        try {
            row.validate();
        } catch (const std::exception &e) {
            throw numeric_error(where + ": " + e.what());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

CsvAppender::CsvAppender(const std::string &path) : path_(path) {
    if (!std::filesystem::exists(path_)) {
        std::ofstream os(path_, std::ios::trunc);
        if (!os)
            throw numeric_error("cannot create results file: " + path_);
        os << csv_header();
        os.flush();
    }
}

void CsvAppender::append(const ResultRow &row) {
    const std::string line = csv_line(row); // validates first: no partial writes
    std::ofstream os(path_, std::ios::app);
    if (!os)
        throw numeric_error("cannot append to results file: " + path_);
    os << line;
    os.flush();
    if (!os)
        throw numeric_error("write to results file failed: " + path_);
}

// --- channel assembly -------------------------------------------------------

std::vector<ofdm::Cir> positions_from_dataset(const twin::Dataset &ds, bool truth_side) {
    ds.validate();
    const std::size_t a_count = ds.meta.antennas;
    std::vector<ofdm::Cir> out(ds.meta.samples);
    for (std::size_t p = 0; p < ds.meta.samples; ++p) {
        out[p].taps.resize(a_count);
        for (std::size_t a = 0; a < a_count; ++a) {
            const twin::CirPair &pair = ds.pairs[p * a_count + a];
            out[p].taps[a] = truth_side ? pair.h_real : pair.h_rt;
        }
    }
    return out;
}

std::vector<ofdm::Cir> corrected_positions(const twin::Dataset &ds, const nn::ModelParams &params) {
    ds.validate();
    const std::size_t a_count = ds.meta.antennas;
    std::vector<ofdm::Cir> out(ds.meta.samples);
    for (std::size_t p = 0; p < ds.meta.samples; ++p) {
        out[p].taps.resize(a_count);
        for (std::size_t a = 0; a < a_count; ++a)
            // scale factor 1: stay in the dataset's stored units so the sweep's
            // common normalization applies uniformly across variants
            out[p].taps[a] = twin::predict(params, ds.pairs[p * a_count + a].h_rt, 1.0);
    }
    return out;
}

double channel_normalization(const std::vector<ofdm::Cir> &truth) {
    double energy = 0.0;
    std::size_t count = 0;
    for (const ofdm::Cir &cir : truth)
        for (const std::vector<cplx> &taps : cir.taps) {
            for (const cplx &z : taps)
                energy += std::norm(z);
            ++count;
        }
    if (count == 0 || energy <= 0.0 || !std::isfinite(energy))
        throw numeric_error("channel normalization: the true channel set carries no energy");
    return std::sqrt(static_cast<double>(count) / energy);
}

void scale_cirs(std::vector<ofdm::Cir> &cirs, double factor) {
    for (ofdm::Cir &cir : cirs)
        for (std::vector<cplx> &taps : cir.taps)
            for (cplx &z : taps)
                z *= factor;
}

// --- NMSE report ------------------------------------------------------------

NmseReport run_nmse_report(const std::string &dataset_path, const std::string &checkpoint_path,
                           const std::string &csv_out) {
    const twin::Dataset ds = twin::load_dataset(dataset_path);
    nn::TrainProvenance prov;
    const nn::ModelParams params = nn::load_checkpoint(checkpoint_path, &prov);
    // An untrained checkpoint stores zeroed provenance and cannot leak; a
    // trained one must match this dataset's identity exactly, otherwise its
    // training indices may fall in this dataset's test split.
    if (prov.realizations != 0 &&
        (prov.dataset_seed != ds.meta.seed || prov.split != ds.meta.split ||
         prov.realizations != ds.meta.realizations)) {
        std::ostringstream os;
        os << "split leakage: checkpoint " << checkpoint_path << " was trained on dataset identity (seed "
           << prov.dataset_seed << ", split " << prov.split << ", realizations " << prov.realizations << ") but "
           << dataset_path << " holds (seed " << ds.meta.seed << ", split " << ds.meta.split << ", realizations "
           << ds.meta.realizations << "); refusing to evaluate";
        throw state_error(os.str());
    }

    NmseReport report;
    report.cases = twin::evaluate_cases(ds, params);
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "NMSE over the held-out split (%zu realizations)\n"
                  "  case 1  twin vs truth      : %10.4f dB   (power-ratio aggregate %10.4f dB)\n"
                  "  case 2  corrected vs truth : %10.4f dB   (power-ratio aggregate %10.4f dB)\n"
                  "  published full-scale reference, for comparison only: "
                  "case 1 = 8.2392 dB, case 2 = -21.2773 dB\n",
                  report.cases.count, report.cases.case1_db, report.cases.case1_ratio_db, report.cases.case2_db,
                  report.cases.case2_ratio_db);
    report.table = buf;

    if (!csv_out.empty()) {
        io::AtomicFileWriter writer(csv_out);
        writer.stream() << "# ctwin-nmse v1\n"
                        << "case,nmse_db,nmse_ratio_db,count\n"
                        << "case1," << fmt_g17(report.cases.case1_db) << ',' << fmt_g17(report.cases.case1_ratio_db)
                        << ',' << report.cases.count << '\n'
                        << "case2," << fmt_g17(report.cases.case2_db) << ',' << fmt_g17(report.cases.case2_ratio_db)
                        << ',' << report.cases.count << '\n';
        writer.commit();
    }
    return report;
}

} // namespace ctwin::harness
