// Twin-correction tests: paired-CIR dataset construction, scaling, file
// round trips, split determinism, the NMSE metric, corrector training
// (overfit/identity/determinism oracles), prediction, and case evaluation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctwin/nn/checkpoint.hpp"
#include "ctwin/rng.hpp"
#include "ctwin/twin/corrector.hpp"
#include "ctwin/twin/dataset.hpp"

using namespace ctwin;
using namespace ctwin::twin;

namespace {

rt::MaterialRegistry itu_registry() { return rt::load_materials("data/itu_materials.txt"); }

// Small open scene (ground only): every position sees LoS + ground bounce.
rt::Scene flat_scene() {
    rt::Scene s;
    s.tx = {0.0, 0.0, 10.0};
    s.rx = {30.0, 0.0, 1.5};
    return s;
}

std::vector<rt::Vec3> line_positions(std::size_t n) {
    std::vector<rt::Vec3> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({20.0 + 2.0 * static_cast<double>(i), 1.0, 1.5});
    return out;
}

BuildConfig quick_build(std::uint64_t seed = 7) {
    BuildConfig cfg;
    cfg.twin_trace.ray_count = 2000;
    cfg.twin_trace.max_reflections = 1;
    cfg.truth_trace = cfg.twin_trace;
    cfg.seed = seed;
    return cfg;
}

// Synthetic paired CIRs with a fixed linear tap relation the corrector can
// learn. Each twin CIR is two smooth pulses with random complex gains and
// fractional delays, so realizations share low-dimensional structure the way
// traced channels do (a net trained on some of them generalizes to the rest).
Dataset toy_dataset(std::size_t realizations, std::size_t taps, std::uint64_t seed) {
    Dataset ds;
    ds.meta.samples = realizations;
    ds.meta.antennas = 1;
    ds.meta.taps = taps;
    ds.meta.realizations = realizations;
    ds.meta.seed = seed;
    Rng rng(seed);
    for (std::size_t r = 0; r < realizations; ++r) {
        CirPair p;
        p.h_rt.resize(taps);
        p.h_real.resize(taps);
        const double t1 = rng.uniform(2.0, 6.0);
        const double t2 = t1 + rng.uniform(1.0, 4.0);
        const double ph1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double ph2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const cplx a1 = std::polar(rng.uniform(0.3, 0.7), ph1);
        const cplx a2 = std::polar(rng.uniform(0.05, 0.25), ph2);
        for (std::size_t i = 0; i < taps; ++i) {
            const double g1 = std::exp(-0.5 * std::pow((double(i) - t1) / 0.8, 2));
            const double g2 = std::exp(-0.5 * std::pow((double(i) - t2) / 0.8, 2));
            p.h_rt[i] = a1 * g1 + a2 * g2;
            // h_real = rotate-and-damp of h_rt plus a deterministic bias: a
            // smooth correction map, learnable from few examples.
            p.h_real[i] = 0.8 * p.h_rt[i] * cplx(0.0, 1.0) + cplx(0.05, -0.02);
        }
        ds.pairs.push_back(std::move(p));
    }
    ds.validate();
    return ds;
}

std::string file_bytes(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

bool tensors_equal(const nn::Tensor &a, const nn::Tensor &b) {
    if (a.shape != b.shape || a.data.size() != b.data.size())
        return false;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (std::memcmp(&a.data[i], &b.data[i], sizeof(double)) != 0)
            return false;
    return true;
}

bool params_equal(const nn::ModelParams &a, const nn::ModelParams &b) {
    if (a.layers.size() != b.layers.size())
        return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (!tensors_equal(a.layers[i].weights, b.layers[i].weights) ||
            !tensors_equal(a.layers[i].bias, b.layers[i].bias) ||
            !tensors_equal(a.layers[i].running_mean, b.layers[i].running_mean) ||
            !tensors_equal(a.layers[i].running_var, b.layers[i].running_var))
            return false;
    }
    return true;
}

void zero_params(nn::ModelParams &params) {
    for (nn::Layer &ly : params.layers) {
        for (double &v : ly.weights.data)
            v = 0.0;
        for (double &v : ly.bias.data)
            v = 0.0;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// dataset construction
// ---------------------------------------------------------------------------

TEST_CASE("build_dataset: identical scenes and configs give identical pairs, R = S*A") {
    rt::MaterialRegistry reg = itu_registry();
    rt::Scene scene = flat_scene();
    const std::vector<rt::Vec3> rxs = line_positions(5);
    Dataset ds = build_dataset(scene, scene, rxs, quick_build(), reg);
    CHECK(ds.meta.samples == 5);
    CHECK(ds.meta.antennas == 4);
    CHECK(ds.meta.taps == 16);
    CHECK(ds.meta.realizations == 20);
    REQUIRE(ds.pairs.size() == 20);
    for (const CirPair &p : ds.pairs) {
        REQUIRE(p.h_rt.size() == 16);
        for (std::size_t i = 0; i < 16; ++i)
            CHECK(p.h_rt[i] == p.h_real[i]); // same pipeline -> bit-equal
    }
    // A nonempty CIR: tap 0 carries the LoS arrival.
    CHECK(std::abs(ds.pairs[0].h_rt[0]) > 0.0);
}

TEST_CASE("build_dataset: deterministic regeneration, bit-identical files") {
    rt::MaterialRegistry reg = itu_registry();
    rt::Scene scene = flat_scene();
    const std::vector<rt::Vec3> rxs = line_positions(3);
    Dataset a = build_dataset(scene, scene, rxs, quick_build(), reg);
    Dataset b = build_dataset(scene, scene, rxs, quick_build(), reg);
    const std::string f1 = "build/twin_tmp_a.ctwd", f2 = "build/twin_tmp_b.ctwd";
    save_dataset(f1, a);
    save_dataset(f2, b);
    CHECK(file_bytes(f1) == file_bytes(f2));
    std::remove(f1.c_str());
    std::remove(f2.c_str());
}

TEST_CASE("build_dataset: shadowed positions are skipped, preconditions enforced") {
    rt::MaterialRegistry reg = itu_registry();
    rt::Scene scene = flat_scene();
    // A wide screen that shadows one of the positions from the transmitter.
    rt::Wall w;
    w.x1 = 10.0; w.y1 = -50.0; w.x2 = 10.0; w.y2 = 50.0;
    w.height = 60.0;
    w.material = "itu_brick";
    w.id = "screen";
    scene.walls.push_back(w);

    BuildConfig cfg = quick_build();
    cfg.twin_trace.max_reflections = 0; // LoS only
    cfg.twin_trace.enable_diffraction = false;
    cfg.twin_trace.enable_scattering = false;
    cfg.truth_trace = cfg.twin_trace;
    std::vector<rt::Vec3> rxs = {{5.0, 0.0, 1.5}, {20.0, 0.0, 1.5}, {7.0, 2.0, 1.5}};
    Dataset ds = build_dataset(scene, scene, rxs, cfg, reg); // middle one is behind the screen
    CHECK(ds.meta.samples == 2);
    CHECK(ds.meta.realizations == 8);

    rt::Scene other = scene;
    other.tx.x += 1.0;
    CHECK_THROWS_AS(build_dataset(scene, other, rxs, cfg, reg), dimension_error);
    other = scene;
    other.carrier_hz *= 2.0;
    CHECK_THROWS_AS(build_dataset(scene, other, rxs, cfg, reg), dimension_error);
    CHECK_THROWS_AS(build_dataset(scene, scene, {}, cfg, reg), dimension_error);
}

TEST_CASE("scale_dataset: global max normalization, idempotence, NMSE invariance") {
    Dataset ds = toy_dataset(8, 16, 3);
    // Plant a known extreme value.
    ds.pairs[2].h_real[5] = cplx(-5.0, 1.0);
    const double n_before = nmse_db(ds.pairs[2].h_real, ds.pairs[2].h_rt);

    const double f = scale_dataset(ds);
    CHECK(f == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(ds.meta.scale_factor == doctest::Approx(5.0).epsilon(1e-12));
    double max_abs = 0.0;
    for (const CirPair &p : ds.pairs)
        for (const std::vector<cplx> *v : {&p.h_rt, &p.h_real})
            for (const cplx &z : *v)
                max_abs = std::max({max_abs, std::abs(z.real()), std::abs(z.imag())});
    CHECK(max_abs == doctest::Approx(1.0).epsilon(1e-12));

    const double n_after = nmse_db(ds.pairs[2].h_real, ds.pairs[2].h_rt);
    CHECK(std::abs(n_after - n_before) < 1e-12); // common factor cancels

    const double f2 = scale_dataset(ds);
    CHECK(f2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ds.meta.scale_factor == doctest::Approx(5.0).epsilon(1e-12)); // cumulative

    Dataset zeros;
    zeros.meta.samples = 1;
    zeros.meta.antennas = 1;
    zeros.meta.taps = 4;
    zeros.meta.realizations = 1;
    zeros.pairs.resize(1);
    zeros.pairs[0].h_rt.assign(4, cplx(0.0, 0.0));
    zeros.pairs[0].h_real.assign(4, cplx(0.0, 0.0));
    CHECK_THROWS_AS(scale_dataset(zeros), numeric_error);
}

TEST_CASE("dataset files: bit-exact round trip and corruption detection") {
    Dataset ds = toy_dataset(6, 16, 11);
    ds.meta.scale_factor = 2.5;
    ds.meta.split = 0.6;
    const std::string f1 = "build/twin_tmp_rt.ctwd", f2 = "build/twin_tmp_rt2.ctwd";
    save_dataset(f1, ds);
    Dataset back = load_dataset(f1);
    CHECK(back.meta.samples == ds.meta.samples);
    CHECK(back.meta.scale_factor == ds.meta.scale_factor);
    CHECK(back.meta.split == ds.meta.split);
    CHECK(back.meta.seed == ds.meta.seed);
    REQUIRE(back.pairs.size() == ds.pairs.size());
    for (std::size_t r = 0; r < ds.pairs.size(); ++r)
        for (std::size_t i = 0; i < ds.meta.taps; ++i) {
            CHECK(back.pairs[r].h_rt[i] == ds.pairs[r].h_rt[i]);
            CHECK(back.pairs[r].h_real[i] == ds.pairs[r].h_real[i]);
        }
    save_dataset(f2, back);
    CHECK(file_bytes(f1) == file_bytes(f2));

    // Truncation and bad magic must be detected.
    {
        std::ofstream os(f2, std::ios::binary | std::ios::trunc);
        const std::string bytes = file_bytes(f1);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_dataset(f2), numeric_error);
    {
        std::ofstream os(f2, std::ios::binary | std::ios::trunc);
        os << "XXXX garbage";
    }
    CHECK_THROWS_AS(load_dataset(f2), numeric_error);
    std::remove(f1.c_str());
    std::remove(f2.c_str());
}

TEST_CASE("split_indices: disjoint, exhaustive, seed-deterministic") {
    DatasetMeta meta;
    meta.samples = 250;
    meta.antennas = 4;
    meta.taps = 16;
    meta.realizations = 1000;
    meta.split = 0.7;
    meta.seed = 99;
    SplitIndices s1 = split_indices(meta);
    SplitIndices s2 = split_indices(meta);
    CHECK(s1.train == s2.train);
    CHECK(s1.test == s2.test);
    CHECK(s1.train.size() == 700);
    CHECK(s1.test.size() == 300);
    std::set<std::size_t> all(s1.train.begin(), s1.train.end());
    for (std::size_t i : s1.test)
        CHECK(all.insert(i).second); // no overlap
    CHECK(all.size() == 1000);       // exhaustive
    CHECK(*all.rbegin() == 999);

    meta.seed = 100;
    SplitIndices s3 = split_indices(meta);
    CHECK(s3.train != s1.train); // the permutation follows the seed
}

TEST_CASE("nmse_db: fixed points of the metric") {
    std::vector<cplx> ref{{1.0, 0.0}, {0.0, -2.0}, {0.5, 0.5}};
    CHECK(nmse_db(ref, ref) == -100.0); // clamp
    std::vector<cplx> zero(ref.size(), cplx(0.0, 0.0));
    CHECK(nmse_db(ref, zero) == 0.0); // ratio exactly 1
    std::vector<cplx> twice(ref);
    for (cplx &z : twice)
        z *= 2.0;
    CHECK(nmse_db(ref, twice) == doctest::Approx(0.0).epsilon(1e-12)); // ||-ref||^2/||ref||^2
    std::vector<cplx> shorter{{1.0, 0.0}};
    CHECK_THROWS_AS(nmse_db(ref, shorter), dimension_error);
    CHECK_THROWS_AS(nmse_db(zero, ref), numeric_error);
}

// ---------------------------------------------------------------------------
// corrector architectures and training
// ---------------------------------------------------------------------------

TEST_CASE("corrector_spec: encoder compresses to length 1 and the head restores 2P") {
    CorrectorConfig cfg;
    const std::size_t p = 16;
    const std::vector<nn::LayerSpec> specs = corrector_spec(ModelKind::encoder_decoder, cfg, p);
    nn::ModelParams model = nn::build_model(specs, {2, p}, 5);
    // Walk the shapes: the bottleneck must reach length 1, the output 2P.
    std::vector<std::size_t> shape{2, p};
    std::size_t min_len = p;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        shape = nn::infer_output_shape(specs[i], shape, i);
        if (shape.size() == 2)
            min_len = std::min(min_len, shape[1]);
    }
    CHECK(min_len == 1);
    REQUIRE(shape.size() == 1);
    CHECK(shape[0] == 2 * p);

    const std::vector<nn::LayerSpec> mlp = corrector_spec(ModelKind::mlp, cfg, p);
    CHECK(mlp.size() == 2 * (cfg.mlp_layers - 1) + 1); // dense+relu pairs, final dense
    std::vector<std::size_t> mshape{2, p};
    for (std::size_t i = 0; i < mlp.size(); ++i)
        mshape = nn::infer_output_shape(mlp[i], mshape, i);
    REQUIRE(mshape.size() == 1);
    CHECK(mshape[0] == 2 * p);

    CorrectorConfig bad;
    bad.encoder_blocks = 1;
    CHECK_THROWS_AS(corrector_spec(ModelKind::encoder_decoder, bad, p), dimension_error);
}

TEST_CASE("train_corrector: encoder-decoder overfits a toy set; prediction is accurate") {
    Dataset ds = toy_dataset(10, 16, 21);
    ds.meta.split = 0.9; // 9 train / 1 test
    CorrectorConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 16;
    cfg.patience = 0;            // no early stop: run the full budget
    cfg.validation_fraction = 0; // train on the whole train split
    cfg.seed = 5;
    TrainResult res = train_corrector(ds, cfg, ModelKind::encoder_decoder);
    CHECK_FALSE(res.aborted);
    REQUIRE(res.log.size() == 500);
    CHECK(res.log.back().train_mse < 1e-3);
    // Late training is far below the start (convergence, allowing wiggle).
    CHECK(res.log.back().train_mse < res.log.front().train_mse / 100.0);

    // Prediction quality on training pairs after the overfit run.
    SplitIndices split = split_indices(ds.meta);
    double worst = -200.0;
    for (std::size_t idx : split.train) {
        const std::vector<cplx> pred = predict(res.params, ds.pairs[idx].h_rt, 1.0);
        worst = std::max(worst, nmse_db(ds.pairs[idx].h_real, pred));
    }
    CHECK(worst < -30.0);

    // predict is pure: repeated calls agree bitwise.
    const std::vector<cplx> p1 = predict(res.params, ds.pairs[0].h_rt, 1.0);
    const std::vector<cplx> p2 = predict(res.params, ds.pairs[0].h_rt, 1.0);
    for (std::size_t i = 0; i < p1.size(); ++i)
        CHECK(p1[i] == p2[i]);

    // De-scaling contract: the factor multiplies the raw network output.
    const std::vector<cplx> scaled = predict(res.params, ds.pairs[0].h_rt, 2.5);
    for (std::size_t i = 0; i < p1.size(); ++i)
        CHECK(std::abs(scaled[i] - 2.5 * p1[i]) < 1e-12);
}

TEST_CASE("train_corrector: zero learning rate leaves parameters bit-identical") {
    Dataset ds = toy_dataset(12, 16, 33);
    CorrectorConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.0;
    cfg.patience = 0;
    cfg.seed = 9;
    // (The MLP has no batch statistics, so "parameters" covers all state.)
    const nn::ModelParams initial =
        nn::build_model(corrector_spec(ModelKind::mlp, cfg, 16), {2, 16}, mix_seed(cfg.seed, 1));
    TrainResult res = train_corrector(ds, cfg, ModelKind::mlp);
    CHECK_FALSE(res.aborted);
    CHECK(params_equal(res.params, initial));
}

TEST_CASE("train_corrector: same seed gives bit-identical logs, params, and checkpoints") {
    Dataset ds = toy_dataset(20, 16, 44);
    CorrectorConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 8;
    cfg.seed = 17;
    TrainResult r1 = train_corrector(ds, cfg, ModelKind::encoder_decoder);
    TrainResult r2 = train_corrector(ds, cfg, ModelKind::encoder_decoder);
    REQUIRE(r1.log.size() == r2.log.size());
    for (std::size_t i = 0; i < r1.log.size(); ++i) {
        CHECK(std::memcmp(&r1.log[i].train_mse, &r2.log[i].train_mse, sizeof(double)) == 0);
        CHECK(std::memcmp(&r1.log[i].val_mse, &r2.log[i].val_mse, sizeof(double)) == 0);
    }
    CHECK(params_equal(r1.params, r2.params));
    CHECK(r1.best_epoch == r2.best_epoch);

    const std::string f1 = "build/twin_tmp_c1.ctwm", f2 = "build/twin_tmp_c2.ctwm";
    nn::save_checkpoint(f1, r1.params, r1.provenance);
    nn::save_checkpoint(f2, r2.params, r2.provenance);
    CHECK(file_bytes(f1) == file_bytes(f2));

    // Provenance records the dataset identity for the leakage guard.
    nn::TrainProvenance prov;
    (void)nn::load_checkpoint(f1, &prov);
    CHECK(prov.dataset_seed == ds.meta.seed);
    CHECK(prov.split == ds.meta.split);
    CHECK(prov.realizations == ds.meta.realizations);
    std::remove(f1.c_str());
    std::remove(f2.c_str());
}

TEST_CASE("train_corrector: rejects unscaled data; validation carve-out keeps test untouched") {
    Dataset ds = toy_dataset(10, 16, 55);
    ds.pairs[0].h_rt[0] = cplx(3.0, 0.0); // magnitude above 1 -> not scaled
    CorrectorConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train_corrector(ds, cfg, ModelKind::mlp), state_error);
}

// ---------------------------------------------------------------------------
// case evaluation
// ---------------------------------------------------------------------------

TEST_CASE("evaluate_cases: zero model scores exactly 0 dB on case 2") {
    Dataset ds = toy_dataset(20, 16, 66);
    CorrectorConfig cfg;
    nn::ModelParams model =
        nn::build_model(corrector_spec(ModelKind::encoder_decoder, cfg, 16), {2, 16}, 1);
    zero_params(model);
    CaseReport rep = evaluate_cases(ds, model);
    CHECK(rep.count == split_indices(ds.meta).test.size());
    CHECK(rep.case2_db == 0.0); // zero predictor: ratio is exactly 1
    CHECK(rep.case1_db > -100.0);
    CHECK(rep.case1_db < 10.0);
}

TEST_CASE("evaluate_cases: identical twin and truth clamp case 1 at -100 dB") {
    rt::MaterialRegistry reg = itu_registry();
    rt::Scene scene = flat_scene();
    Dataset ds = build_dataset(scene, scene, line_positions(4), quick_build(), reg);
    scale_dataset(ds);
    CorrectorConfig cfg;
    nn::ModelParams model = nn::build_model(corrector_spec(ModelKind::mlp, cfg, 16), {2, 16}, 2);
    zero_params(model);
    CaseReport rep = evaluate_cases(ds, model);
    CHECK(rep.case1_db == -100.0);
    CHECK(rep.case1_ratio_db == -100.0);
    CHECK(rep.case2_db == 0.0);
}

TEST_CASE("evaluate_cases: trained corrector beats the identity on held-out data") {
    // Toy correction task on structured CIRs: the held-out realizations lie on
    // the same pulse manifold, so a trained net must transfer, not memorize.
    Dataset ds = toy_dataset(300, 16, 77);
    CorrectorConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 16;
    cfg.patience = 0;
    cfg.seed = 3;
    TrainResult res = train_corrector(ds, cfg, ModelKind::mlp);
    CHECK_FALSE(res.aborted);
    CaseReport rep = evaluate_cases(ds, res.params);
    // case1: h_rt vs h_real differ by the planted rotation -> several dB.
    CHECK(rep.case1_db > -5.0);
    // case2: the learned correction must clearly improve on the raw twin.
    CHECK(rep.case2_db < rep.case1_db - 10.0);
}
