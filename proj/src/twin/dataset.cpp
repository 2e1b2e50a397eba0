#include "ctwin/twin/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ctwin/io_util.hpp"
#include "ctwin/rng.hpp"

namespace ctwin::twin {

namespace {
constexpr char kMagic[5] = "CTWD";
constexpr std::uint32_t kVersion = 1;
} // namespace

void DatasetMeta::validate() const {
    if (features != 2)
        throw dimension_error("dataset meta: feature count must be 2 (real, imaginary)");
    if (realizations != samples * antennas)
        throw dimension_error("dataset meta: realizations must equal samples * antennas");
    if (taps == 0)
        throw dimension_error("dataset meta: tap count must be positive");
    if (!(split > 0.0 && split < 1.0))
        throw dimension_error("dataset meta: split must lie strictly between 0 and 1");
    if (!(scale_factor > 0.0) || !std::isfinite(scale_factor))
        throw dimension_error("dataset meta: scale factor must be positive and finite");
    if (!(sample_rate > 0.0))
        throw dimension_error("dataset meta: sample rate must be positive");
}

void Dataset::validate() const {
    meta.validate();
    if (pairs.size() != meta.realizations)
        throw dimension_error("dataset: pair count does not match metadata realizations");
    for (const CirPair &p : pairs) {
        if (p.h_rt.size() != meta.taps || p.h_real.size() != meta.taps)
            throw dimension_error("dataset: realization length differs from metadata tap count");
        for (std::size_t i = 0; i < meta.taps; ++i)
            if (!std::isfinite(p.h_rt[i].real()) || !std::isfinite(p.h_rt[i].imag()) ||
                !std::isfinite(p.h_real[i].real()) || !std::isfinite(p.h_real[i].imag()))
                throw numeric_error("dataset: non-finite tap value");
    }
}

Dataset build_dataset(const rt::Scene &twin_scene, const rt::Scene &truth_scene,
                      const std::vector<rt::Vec3> &rx_positions, const BuildConfig &cfg,
                      const rt::MaterialRegistry &registry) {
    if (rx_positions.empty())
        throw dimension_error("build_dataset: need at least one rx position");
    if (!(twin_scene.tx == truth_scene.tx))
        throw dimension_error("build_dataset: twin and truth scenes must share the transmitter");
    if (twin_scene.carrier_hz != truth_scene.carrier_hz)
        throw dimension_error("build_dataset: twin and truth scenes must share the carrier");
    if (cfg.taps == 0)
        throw dimension_error("build_dataset: tap count must be positive");

    const std::vector<rt::PathList> twin_paths = rt::trace_batch(twin_scene, cfg.twin_trace, rx_positions, registry);
    const std::vector<rt::PathList> truth_paths =
        rt::trace_batch(truth_scene, cfg.truth_trace, rx_positions, registry);

    Dataset ds;
    ds.meta.antennas = cfg.array.antenna_count;
    ds.meta.taps = cfg.taps;
    ds.meta.sample_rate = cfg.sample_rate;
    ds.meta.seed = cfg.seed;

    for (std::size_t i = 0; i < rx_positions.size(); ++i) {
        if (twin_paths[i].paths.empty() || truth_paths[i].paths.empty()) {
            std::fprintf(stderr, "build_dataset: position %zu (%.3f, %.3f, %.3f) has no paths, skipped\n", i,
                         rx_positions[i].x, rx_positions[i].y, rx_positions[i].z);
            continue;
        }
        // Shared delay reference so the pair shares one tap grid.
        double ref = std::numeric_limits<double>::infinity();
        for (const rt::Path &p : twin_paths[i].paths)
            ref = std::min(ref, p.delay_s);
        for (const rt::Path &p : truth_paths[i].paths)
            ref = std::min(ref, p.delay_s);
        const rt::CirResult twin_cir = rt::paths_to_cir(twin_paths[i], cfg.array, cfg.sample_rate, cfg.taps, ref);
        const rt::CirResult truth_cir = rt::paths_to_cir(truth_paths[i], cfg.array, cfg.sample_rate, cfg.taps, ref);
        for (std::size_t a = 0; a < cfg.array.antenna_count; ++a) {
            CirPair pair;
            pair.h_rt = twin_cir.cir.taps[a];
            pair.h_real = truth_cir.cir.taps[a];
            ds.pairs.push_back(std::move(pair));
        }
        ++ds.meta.samples;
    }
    ds.meta.realizations = ds.meta.samples * ds.meta.antennas;
    ds.validate();
    return ds;
}

double scale_dataset(Dataset &dataset) {
    dataset.validate();
    double max_abs = 0.0;
    for (const CirPair &p : dataset.pairs)
        for (const std::vector<cplx> *v : {&p.h_rt, &p.h_real})
            for (const cplx &z : *v)
                max_abs = std::max({max_abs, std::abs(z.real()), std::abs(z.imag())});
    if (max_abs == 0.0)
        throw numeric_error("scale_dataset: all entries are zero");
    for (CirPair &p : dataset.pairs)
        for (std::vector<cplx> *v : {&p.h_rt, &p.h_real})
            for (cplx &z : *v)
                z /= max_abs;
    dataset.meta.scale_factor *= max_abs;
    return max_abs;
}

void save_dataset(const std::string &path, const Dataset &dataset) {
    dataset.validate();
    io::AtomicFileWriter writer(path);
    std::ostream &os = writer.stream();
    io::write_magic(os, kMagic);
    io::write_u32(os, kVersion);
    io::write_u64(os, dataset.meta.samples);
    io::write_u64(os, dataset.meta.antennas);
    io::write_u64(os, dataset.meta.taps);
    io::write_u64(os, dataset.meta.realizations);
    io::write_u32(os, dataset.meta.features);
    io::write_f64(os, dataset.meta.sample_rate);
    io::write_f64(os, dataset.meta.scale_factor);
    io::write_f64(os, dataset.meta.split);
    io::write_u64(os, dataset.meta.seed);
    for (const CirPair &p : dataset.pairs)
        for (const std::vector<cplx> *v : {&p.h_rt, &p.h_real}) {
            for (const cplx &z : *v)
                io::write_f64(os, z.real());
            for (const cplx &z : *v)
                io::write_f64(os, z.imag());
        }
    writer.commit();
}

Dataset load_dataset(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw numeric_error("cannot open dataset file: " + path);
    io::expect_magic(is, kMagic, path);
    const std::uint32_t version = io::read_u32(is);
    if (version != kVersion)
        throw numeric_error(path + ": unsupported dataset version " + std::to_string(version));
    Dataset ds;
    ds.meta.samples = io::read_u64(is);
    ds.meta.antennas = io::read_u64(is);
    ds.meta.taps = io::read_u64(is);
    ds.meta.realizations = io::read_u64(is);
    ds.meta.features = io::read_u32(is);
    ds.meta.sample_rate = io::read_f64(is);
    ds.meta.scale_factor = io::read_f64(is);
    ds.meta.split = io::read_f64(is);
    ds.meta.seed = io::read_u64(is);
    ds.meta.validate();
    ds.pairs.resize(ds.meta.realizations);
    for (CirPair &p : ds.pairs)
        for (std::vector<cplx> *v : {&p.h_rt, &p.h_real}) {
            v->resize(ds.meta.taps);
            for (cplx &z : *v)
                z = cplx(io::read_f64(is), z.imag());
            for (cplx &z : *v)
                z = cplx(z.real(), io::read_f64(is));
        }
    ds.validate();
    return ds;
}

SplitIndices split_indices(const DatasetMeta &meta) {
    meta.validate();
    const std::size_t r = static_cast<std::size_t>(meta.realizations);
    std::vector<std::size_t> order(r);
    for (std::size_t i = 0; i < r; ++i)
        order[i] = i;
    Rng rng(mix_seed(meta.seed, 0x5717ULL)); // dedicated split stream
    for (std::size_t i = r; i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_u64() % i)]);
    const std::size_t train_count = static_cast<std::size_t>(std::llround(meta.split * static_cast<double>(r)));
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
    return out;
}

double nmse_db(const std::vector<cplx> &ref, const std::vector<cplx> &hat) {
    if (ref.size() != hat.size())
        throw dimension_error("nmse: vectors differ in length (" + std::to_string(ref.size()) + " vs " +
                              std::to_string(hat.size()) + ")");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        num += std::norm(ref[i] - hat[i]);
        den += std::norm(ref[i]);
    }
    if (den == 0.0)
        throw numeric_error("nmse: reference vector has zero energy");
    const double ratio = num / den;
    if (ratio <= 1e-10)
        return -100.0; // clamp
    return 10.0 * std::log10(ratio);
}

} // namespace ctwin::twin
