#include <atomic>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "ctwin/harness/experiment.hpp"
#include "ctwin/io_util.hpp"
#include "ctwin/nn/checkpoint.hpp"
#include "ctwin/rng.hpp"

namespace ctwin::harness {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// The resume key: a row is the same Monte-Carlo point iff scenario, SNR and
// seed agree (the seed already encodes the variant).
std::string resume_key(const std::string &scenario, double snr_db, std::uint64_t seed) {
    return scenario + "|" + g17(snr_db) + "|" + std::to_string(seed);
}

} // namespace

BerPoint simulate_point(const std::vector<ofdm::Cir> &estimate, const std::vector<ofdm::Cir> &truth,
                        precode::PrecoderMode mode, precode::Normalization norm, double snr_db,
                        bool noise_enabled, std::size_t trials, std::size_t frames_per_trial,
                        const ofdm::OfdmConfig &cfg, std::uint64_t seed) {
    cfg.validate();
    if (estimate.empty() || estimate.size() != truth.size())
        throw dimension_error("simulate_point: estimate and truth channel sets must be non-empty and equal-sized");
    if (trials < 1 || frames_per_trial < 1)
        throw dimension_error("simulate_point: trials and frames per trial must be at least 1");

    const double snr = std::pow(10.0, snr_db / 10.0);
    const ofdm::NoiseConfig noise =
        noise_enabled ? ofdm::NoiseConfig::from_snr_db(snr_db) : ofdm::NoiseConfig::off();
    const precode::PowerConfig power{snr}; // MMSE regularizer 1/P_t = noise variance
    const std::size_t n_pos = estimate.size();
    const std::size_t frame_bits = cfg.subcarrier_count * cfg.modulation.bits_per_symbol();

    // Precoder weights and true effective channel are fixed per position.
    struct Prepared {
        std::vector<std::vector<cplx>> weights;
        std::vector<cplx> h_eff;
        bool ready = false;
    };
    std::vector<Prepared> cache(n_pos);

    Rng rng(seed);
    std::uint64_t errors = 0;
    std::uint64_t bits_total = 0;
    std::vector<std::uint8_t> bits(frame_bits);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t p = t % n_pos;
        if (estimate[p].antenna_count() != truth[p].antenna_count())
            throw dimension_error("simulate_point: estimate/truth antenna counts differ at a position");
        Prepared &pc = cache[p];
        if (!pc.ready) {
            const ofdm::FreqResponse cfr_hat = ofdm::cir_to_cfr(estimate[p], cfg.subcarrier_count);
            const ofdm::FreqResponse cfr_true = ofdm::cir_to_cfr(truth[p], cfg.subcarrier_count);
            precode::Precoder pre = mode == precode::PrecoderMode::mrt
                                        ? precode::mrt(cfr_hat, norm)
                                        : precode::mmse(cfr_hat, power, norm);
            pc.h_eff = precode::effective_channel(pre, cfr_true);
            pc.weights = std::move(pre.weights);
            pc.ready = true;
        }
        for (std::size_t f = 0; f < frames_per_trial; ++f) {
            for (std::uint8_t &b : bits)
                b = rng.uniform() < 0.5 ? 0 : 1;
            const std::vector<cplx> symbols = ofdm::map_bits(bits, cfg.modulation);
            std::vector<std::vector<cplx>> tx(truth[p].antenna_count());
            for (std::size_t a = 0; a < tx.size(); ++a) {
                std::vector<cplx> weighted(symbols.size());
                for (std::size_t k = 0; k < symbols.size(); ++k)
                    weighted[k] = pc.weights[a][k] * symbols[k];
                tx[a] = ofdm::ofdm_modulate(weighted, cfg);
            }
            const std::uint64_t noise_seed = rng.next_u64();
            const std::vector<cplx> received = ofdm::apply_channel(tx, truth[p], noise, noise_seed, cfg);
            const std::vector<cplx> grid = ofdm::ofdm_demodulate(received, cfg);
            const ofdm::EqualizedGrid eq = ofdm::zf_equalize(grid, pc.h_eff);
            const std::vector<std::uint8_t> bits_hat = ofdm::demap_symbols(eq.symbols, cfg.modulation);
            for (std::size_t i = 0; i < bits.size(); ++i)
                errors += bits[i] != bits_hat[i] ? 1 : 0;
            bits_total += bits.size();
        }
    }

    BerPoint out;
    out.bits = bits_total;
    out.ber = static_cast<double>(errors) / static_cast<double>(bits_total);
    out.std_err = std::sqrt(out.ber * (1.0 - out.ber) / static_cast<double>(bits_total));
    return out;
}

SweepOutcome run_ber_sweep(const ExperimentConfig &cfg) {
    cfg.validate();
    if (cfg.variants.empty())
        throw dimension_error("run_ber_sweep: configure at least one channel-knowledge variant");

    // Load every variant's channel set; one normalization factor, derived from
    // the first dataset's truth side, applies to all of them.
    struct Loaded {
        std::string label;
        std::vector<ofdm::Cir> est;
        std::vector<ofdm::Cir> truth;
    };
    std::vector<Loaded> sets;
    double factor = 0.0;
    for (const VariantSource &v : cfg.variants) {
        const twin::Dataset ds = twin::load_dataset(v.dataset_path);
        if (ds.meta.antennas != cfg.antenna_count)
            throw dimension_error("run_ber_sweep: dataset " + v.dataset_path + " carries " +
                                  std::to_string(ds.meta.antennas) + " antennas, the experiment expects " +
                                  std::to_string(cfg.antenna_count));
        Loaded ld;
        ld.label = v.label;
        ld.truth = positions_from_dataset(ds, true);
        if (v.use_truth)
            ld.est = ld.truth;
        else if (!v.checkpoint_path.empty())
            ld.est = corrected_positions(ds, nn::load_checkpoint(v.checkpoint_path));
        else
            ld.est = positions_from_dataset(ds, false);
        if (factor == 0.0)
            factor = channel_normalization(ld.truth);
        scale_cirs(ld.est, factor);
        scale_cirs(ld.truth, factor);
        sets.push_back(std::move(ld));
    }

    // Deterministic grid order: SNR outer, variant inner, precoder innermost.
    struct Job {
        double snr_db;
        const Loaded *set;
        precode::PrecoderMode mode;
        std::string label;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    const std::string scenario = to_string(cfg.scenario);
    for (double snr : cfg.snr_grid_db)
        for (const Loaded &ld : sets)
            for (precode::PrecoderMode mode : cfg.precoders) {
                std::string label = ld.label;
                if (cfg.precoders.size() > 1)
                    label += mode == precode::PrecoderMode::mrt ? "-mrt" : "-mmse";
                jobs.push_back({snr, &ld, mode, label, point_seed(cfg.base_seed, scenario, snr, label)});
            }

    // Resume: rows already persisted under the same key are reused verbatim.
    std::map<std::string, ResultRow> existing;
    if (!cfg.output_csv.empty() && std::filesystem::exists(cfg.output_csv))
        for (ResultRow &row : read_results_csv(cfg.output_csv))
            existing.emplace(resume_key(row.scenario, row.snr_db, row.seed), std::move(row));

    SweepOutcome out;
    std::vector<ResultRow> rows(jobs.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto it = existing.find(resume_key(scenario, jobs[i].snr_db, jobs[i].seed));
        if (it != existing.end()) {
            rows[i] = it->second;
            ++out.skipped;
        } else {
            pending.push_back(i);
        }
    }

    std::optional<CsvAppender> appender;
    if (!cfg.output_csv.empty())
        appender.emplace(cfg.output_csv);

    const auto compute = [&](std::size_t ji) {
        const Job &job = jobs[ji];
        const BerPoint point =
            simulate_point(job.set->est, job.set->truth, job.mode, cfg.normalization, job.snr_db,
                           cfg.noise_enabled, cfg.trials, cfg.frames_per_trial, cfg.ofdm, job.seed);
        ResultRow row;
        row.scenario = scenario;
        row.variant = job.label;
        row.snr_db = job.snr_db;
        row.ber = point.ber;
        row.bits = point.bits;
        row.std_err = point.std_err;
        row.seed = job.seed;
        return row;
    };

    const std::size_t nthreads =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), pending.size());
    if (nthreads <= 1) {
        for (std::size_t ji : pending) {
            rows[ji] = compute(ji);
            if (appender)
                appender->append(rows[ji]);
            ++out.computed;
        }
    } else {
        // Points run in parallel; the append below stays serialized in grid
        // order so a completed file is byte-for-byte reproducible.
        std::vector<ResultRow> slot(pending.size());
        std::vector<std::exception_ptr> failure(pending.size());
        std::vector<char> done(pending.size(), 0);
        std::mutex mtx;
        std::condition_variable cv;
        std::atomic<std::size_t> next{0};
        const auto worker = [&] {
            for (;;) {
                const std::size_t k = next.fetch_add(1);
                if (k >= pending.size())
                    return;
                ResultRow row;
                std::exception_ptr err;
                try {
                    row = compute(pending[k]);
                } catch (...) {
                    err = std::current_exception();
                }
                {
                    std::lock_guard<std::mutex> lock(mtx);
                    slot[k] = std::move(row);
                    failure[k] = err;
                    done[k] = 1;
                }
                cv.notify_all();
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back(worker);
        std::exception_ptr first_failure;
        for (std::size_t k = 0; k < pending.size(); ++k) {
            std::unique_lock<std::mutex> lock(mtx);
            cv.wait(lock, [&] { return done[k] == 1; });
            const std::exception_ptr err = failure[k];
            ResultRow row = std::move(slot[k]);
            lock.unlock();
            if (err) {
                if (!first_failure)
                    first_failure = err;
                continue;
            }
            if (first_failure)
                continue; // keep draining, but stop persisting after a failure
            rows[pending[k]] = std::move(row);
            if (appender)
                appender->append(rows[pending[k]]);
            ++out.computed;
        }
        for (std::thread &th : pool)
            th.join();
        if (first_failure)
            std::rethrow_exception(first_failure);
    }

    out.rows = std::move(rows);
    if (!cfg.output_svg.empty()) {
        io::AtomicFileWriter writer(cfg.output_svg);
        writer.stream() << render_plot_svg(out.rows);
        writer.commit();
    }
    return out;
}

} // namespace ctwin::harness
