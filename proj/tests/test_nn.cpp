#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ctwin/nn/adam.hpp"
#include "ctwin/nn/checkpoint.hpp"
#include "ctwin/nn/gradcheck.hpp"
#include "ctwin/nn/layers.hpp"
#include "ctwin/rng.hpp"

using namespace ctwin;
using namespace ctwin::nn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto &v : t.data)
        v = rng.normal();
    return t;
}

bool bitwise_equal(const Tensor &a, const Tensor &b) {
    if (!a.same_shape(b))
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data[i] != b.data[i])
            return false;
    return true;
}

bool bitwise_equal(const ModelParams &a, const ModelParams &b) {
    if (a.layer_count() != b.layer_count())
        return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (!bitwise_equal(a.layers[i].weights, b.layers[i].weights))
            return false;
        if (!bitwise_equal(a.layers[i].bias, b.layers[i].bias))
            return false;
        if (!bitwise_equal(a.layers[i].running_mean, b.layers[i].running_mean))
            return false;
        if (!bitwise_equal(a.layers[i].running_var, b.layers[i].running_var))
            return false;
    }
    return true;
}

// Straight-line re-computations, independent of the library loops.

Tensor naive_conv1d(const Tensor &x, const Tensor &w, const Tensor &b, std::size_t stride) {
    const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    const std::size_t OC = w.dim(0), K = w.dim(2);
    const std::size_t pad = (K - 1) / 2;
    const std::size_t Lo = (L + 2 * pad - K) / stride + 1;
    Tensor y = Tensor::zeros({B, OC, Lo});
    for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t oc = 0; oc < OC; ++oc)
            for (std::size_t j = 0; j < Lo; ++j) {
                double acc = b.data[oc];
                for (std::size_t ic = 0; ic < C; ++ic)
                    for (std::size_t t = 0; t < K; ++t) {
                        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(j * stride + t) -
                                                 static_cast<std::ptrdiff_t>(pad);
                        if (n >= 0 && n < static_cast<std::ptrdiff_t>(L))
                            acc += w.data[(oc * C + ic) * K + t] * x.data[(bb * C + ic) * L + n];
                    }
                y.data[(bb * OC + oc) * Lo + j] = acc;
            }
    return y;
}

Tensor naive_dense(const Tensor &x, const Tensor &w, const Tensor &b) {
    const std::size_t B = x.dim(0);
    const std::size_t M = x.size() / B;
    const std::size_t W = w.dim(0);
    Tensor y = Tensor::zeros({B, W});
    for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t o = 0; o < W; ++o) {
            double acc = b.data[o];
            for (std::size_t m = 0; m < M; ++m)
                acc += w.data[o * M + m] * x.data[bb * M + m];
            y.data[bb * W + o] = acc;
        }
    return y;
}

} // namespace

TEST_CASE("tensor shape/data validation") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), dimension_error);
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
}

TEST_CASE("forward: all-zero parameters give the zero map") {
    ModelParams m = build_model({LayerSpec::conv1d(3, 3), LayerSpec::relu(), LayerSpec::dense(4)}, {2, 5}, 77);
    for (auto &ly : m.layers) {
        for (auto &v : ly.weights.data)
            v = 0.0;
        for (auto &v : ly.bias.data)
            v = 0.0;
    }
    Tensor out = infer(m, random_tensor({2, 2, 5}, 1));
    for (double v : out.data)
        CHECK(v == 0.0);
}

TEST_CASE("forward: delta kernel is the identity") {
    ModelParams m = build_model({LayerSpec::conv1d(1, 3)}, {1, 3}, 0);
    m.layers[0].weights.data = {0.0, 1.0, 0.0};
    m.layers[0].bias.data = {0.0};
    Tensor x({1, 1, 3}, {1.0, 2.0, 3.0});
    Tensor y = infer(m, x);
    REQUIRE(y.size() == 3);
    CHECK(y.data[0] == doctest::Approx(1.0));
    CHECK(y.data[1] == doctest::Approx(2.0));
    CHECK(y.data[2] == doctest::Approx(3.0));

    // Same property at a different length.
    Tensor x2 = random_tensor({1, 1, 9}, 4);
    Tensor y2 = infer(m, x2);
    for (std::size_t i = 0; i < 9; ++i)
        CHECK(y2.data[i] == doctest::Approx(x2.data[i]).epsilon(1e-15));
}

TEST_CASE("forward: 3-layer model matches straight-line recomputation to 1e-12") {
    ModelParams m = build_model({LayerSpec::conv1d(4, 3), LayerSpec::relu(), LayerSpec::dense(5)}, {2, 6}, 99);
    Tensor x = random_tensor({3, 2, 6}, 5);
    Tensor got = infer(m, x);

    Tensor h = naive_conv1d(x, m.layers[0].weights, m.layers[0].bias, 1);
    for (auto &v : h.data)
        v = v > 0.0 ? v : 0.0;
    Tensor want = naive_dense(h, m.layers[2].weights, m.layers[2].bias);

    REQUIRE(got.same_shape(want));
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
}

TEST_CASE("forward: shape mismatch names the offending layer") {
    ModelParams m = build_model({LayerSpec::conv1d(2, 3)}, {4, 8}, 3);
    Tensor bad = random_tensor({1, 3, 8}, 2); // 3 channels, weights expect 4
    try {
        infer(m, bad);
        FAIL("expected dimension_error");
    } catch (const dimension_error &e) {
        const std::string msg = e.what();
        CHECK(msg.find("layer 0") != std::string::npos);
        CHECK(msg.find("conv1d") != std::string::npos);
    }
}

TEST_CASE("conv1d_transpose stride 2 exactly doubles the length") {
    for (std::size_t len : {4u, 7u, 16u}) {
        ModelParams m = build_model({LayerSpec::conv1d_transpose(3, 3, 2)}, {2, len}, 11);
        Tensor y = infer(m, random_tensor({1, 2, len}, len));
        CHECK(y.dim(2) == 2 * len);
    }
}

TEST_CASE("batchnorm: train normalizes with batch statistics, infer uses running") {
    ModelParams m = build_model({LayerSpec::batchnorm()}, {2, 4}, 1);
    Tensor x = random_tensor({5, 2, 4}, 21);
    ForwardTrace trace;
    Tensor y = forward(m, x, Mode::train, &trace);

    // Per-channel output mean ~0, biased variance ~1 (up to the eps floor).
    const std::size_t B = 5, C = 2, I = 4;
    for (std::size_t c = 0; c < C; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < I; ++i)
                mean += y.data[(b * C + c) * I + i];
        mean /= static_cast<double>(B * I);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < I; ++i) {
                const double d = y.data[(b * C + c) * I + i] - mean;
                var += d * d;
            }
        var /= static_cast<double>(B * I);
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }

    // Running statistics moved from their init by momentum 0.1.
    CHECK(m.layers[0].running_mean.data[0] == doctest::Approx(0.1 * trace.batch_mean[0].data[0]).epsilon(1e-12));
    CHECK(m.layers[0].running_var.data[0] ==
          doctest::Approx(0.9 * 1.0 + 0.1 * trace.batch_var[0].data[0]).epsilon(1e-12));

    // Infer mode must not touch running statistics.
    const Tensor rm = m.layers[0].running_mean;
    infer(m, x);
    CHECK(bitwise_equal(rm, m.layers[0].running_mean));
}

TEST_CASE("backward: identity network with target=input has zero gradients") {
    ModelParams m = build_model({LayerSpec::conv1d(1, 3)}, {1, 6}, 0);
    m.layers[0].weights.data = {0.0, 1.0, 0.0};
    m.layers[0].bias.data = {0.0};
    Tensor x = random_tensor({2, 1, 6}, 9);
    ForwardTrace trace;
    Tensor out = forward(m, x, Mode::train, &trace);
    MseResult loss = mse_loss(out, x);
    CHECK(loss.loss == doctest::Approx(0.0));
    Gradients g = backward(m, trace, loss.grad);
    for (double v : g.layers[0].weights.data)
        CHECK(v == 0.0);
    for (double v : g.layers[0].bias.data)
        CHECK(v == 0.0);
}

TEST_CASE("backward: dense layer closed-form gradients") {
    ModelParams m = build_model({LayerSpec::dense(3)}, {4}, 17);
    Tensor x = random_tensor({1, 4}, 31);
    ForwardTrace trace;
    forward(m, x, Mode::train, &trace);
    Tensor g = random_tensor({1, 3}, 32);
    Gradients grads = backward(m, trace, g);
    for (std::size_t o = 0; o < 3; ++o) {
        CHECK(grads.layers[0].bias.data[o] == doctest::Approx(g.data[o]).epsilon(1e-14));
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(grads.layers[0].weights.data[o * 4 + i] == doctest::Approx(g.data[o] * x.data[i]).epsilon(1e-14));
    }
    // Input gradient is W^T g.
    for (std::size_t i = 0; i < 4; ++i) {
        double want = 0.0;
        for (std::size_t o = 0; o < 3; ++o)
            want += m.layers[0].weights.data[o * 4 + i] * g.data[o];
        CHECK(grads.input.data[i] == doctest::Approx(want).epsilon(1e-13));
    }
}

TEST_CASE("backward: requires a retained train-mode forward") {
    ModelParams m = build_model({LayerSpec::dense(2)}, {3}, 5);
    ForwardTrace empty;
    CHECK_THROWS_AS(backward(m, empty, Tensor::zeros({1, 2})), state_error);

    ForwardTrace infer_trace;
    forward(m, random_tensor({1, 3}, 7), Mode::infer, &infer_trace);
    CHECK_THROWS_AS(backward(m, infer_trace, Tensor::zeros({1, 2})), state_error);
}

TEST_CASE("mse_loss examples and random oracle") {
    Tensor a({2}, {1.0, 1.0});
    Tensor b({2}, {0.0, 0.0});
    MseResult r = mse_loss(a, b);
    CHECK(r.loss == doctest::Approx(1.0));
    CHECK(r.grad.data[0] == doctest::Approx(1.0));
    CHECK(r.grad.data[1] == doctest::Approx(1.0));

    MseResult zero = mse_loss(a, a);
    CHECK(zero.loss == 0.0);
    for (double v : zero.grad.data)
        CHECK(v == 0.0);

    Tensor p = random_tensor({3, 7}, 41);
    Tensor t = random_tensor({3, 7}, 42);
    MseResult rr = mse_loss(p, t);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        acc += (p.data[i] - t.data[i]) * (p.data[i] - t.data[i]);
    CHECK(rr.loss == doctest::Approx(acc / 21.0).epsilon(1e-12));

    CHECK_THROWS_AS(mse_loss(a, Tensor::zeros({3})), dimension_error);
}

TEST_CASE("adam: zero learning rate leaves parameters, moves moments") {
    ModelParams m = build_model({LayerSpec::dense(2)}, {3}, 6);
    const ModelParams before = m;
    AdamState st = make_adam_state(m);
    Gradients g = zero_gradients(m);
    for (auto &v : g.layers[0].weights.data)
        v = 1.5;
    AdamConfig cfg;
    cfg.learning_rate = 0.0;
    adam_step(m, g, st, cfg);
    CHECK(bitwise_equal(before, m));
    CHECK(st.step == 1);
    CHECK(st.m[0].weights.data[0] == doctest::Approx(0.1 * 1.5).epsilon(1e-14));
    CHECK(st.v[0].weights.data[0] == doctest::Approx(0.001 * 1.5 * 1.5).epsilon(1e-10));
}

TEST_CASE("adam: first step moves a scalar by about the learning rate") {
    ModelParams m;
    Layer ly;
    ly.spec = LayerSpec::dense(1);
    ly.weights = Tensor({1, 1}, {0.0});
    ly.bias = Tensor({1}, {0.0});
    m.layers.push_back(ly);
    AdamState st = make_adam_state(m);
    Gradients g = zero_gradients(m);
    g.layers[0].weights.data[0] = 0.7;
    AdamConfig cfg;
    cfg.learning_rate = 8e-4;
    adam_step(m, g, st, cfg);
    // Bias-corrected first step is -xi * g/(|g| + eps') ~ -xi.
    CHECK(m.layers[0].weights.data[0] == doctest::Approx(-8e-4).epsilon(1e-6));
}

TEST_CASE("adam: converges on a quadratic") {
    ModelParams m;
    Layer ly;
    ly.spec = LayerSpec::dense(1);
    ly.weights = Tensor({1, 1}, {0.0});
    ly.bias = Tensor({1}, {0.0});
    m.layers.push_back(ly);
    AdamState st = make_adam_state(m);
    AdamConfig cfg;
    cfg.learning_rate = 0.05;
    const double start_gap = std::abs(m.layers[0].weights.data[0] - 3.0);
    for (int i = 0; i < 100; ++i) {
        Gradients g = zero_gradients(m);
        g.layers[0].weights.data[0] = 2.0 * (m.layers[0].weights.data[0] - 3.0);
        adam_step(m, g, st, cfg);
    }
    CHECK(std::abs(m.layers[0].weights.data[0] - 3.0) < start_gap);
    CHECK(st.step == 100);
}

TEST_CASE("adam: rejects non-finite gradients without touching state") {
    ModelParams m = build_model({LayerSpec::dense(1)}, {2}, 8);
    AdamState st = make_adam_state(m);
    const ModelParams before = m;
    Gradients g = zero_gradients(m);
    g.layers[0].weights.data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(m, g, st, AdamConfig{}), numeric_error);
    CHECK(st.step == 0);
    CHECK(bitwise_equal(before, m));
}

TEST_CASE("gradcheck: linear model is exact to 1e-8") {
    ModelParams m = build_model({LayerSpec::dense(3), LayerSpec::dense(2)}, {4}, 12);
    GradCheckReport rep = gradient_check(m, random_tensor({2, 4}, 13));
    CHECK(rep.compared > 0);
    CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("gradcheck: every layer kind passes under 1e-4") {
    struct Case {
        std::vector<LayerSpec> specs;
        std::vector<std::size_t> shape; // without batch
    };
    const Case cases[] = {
        {{LayerSpec::conv1d(3, 3)}, {2, 5}},
        {{LayerSpec::conv1d(2, 3, 2)}, {2, 7}},
        {{LayerSpec::conv1d_transpose(2, 3, 2)}, {3, 4}},
        {{LayerSpec::batchnorm()}, {2, 4}},
        {{LayerSpec::dense(5), LayerSpec::relu(), LayerSpec::dense(2)}, {4}},
    };
    std::uint64_t seed = 100;
    for (const auto &c : cases) {
        ModelParams m = build_model(c.specs, c.shape, seed);
        std::vector<std::size_t> full = {3};
        full.insert(full.end(), c.shape.begin(), c.shape.end());
        GradCheckReport rep = gradient_check(m, random_tensor(full, seed + 1));
        CHECK(rep.compared > 0);
        CHECK(rep.max_rel_error < 1e-4);
        seed += 2;
    }
}

TEST_CASE("gradcheck: mixed deep stack passes under 1e-4") {
    const std::vector<LayerSpec> specs = {
        LayerSpec::conv1d(4, 3, 2),  LayerSpec::batchnorm(),       LayerSpec::relu(),
        LayerSpec::conv1d(6, 3, 2),  LayerSpec::relu(),            LayerSpec::conv1d_transpose(4, 3, 2),
        LayerSpec::relu(),           LayerSpec::conv1d(2, 1),      LayerSpec::dense(8),
    };
    ModelParams m = build_model(specs, {2, 8}, 31);
    GradCheckReport rep = gradient_check(m, random_tensor({2, 2, 8}, 33));
    CHECK(rep.compared > 0);
    CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("gradcheck: relu kink at exactly zero is excluded") {
    // Input with an exact zero at the relu and weights that preserve it.
    ModelParams m = build_model({LayerSpec::relu(), LayerSpec::dense(1)}, {3}, 50);
    Tensor x({1, 3}, {0.0, 1.0, -1.0});
    GradCheckReport rep = gradient_check(m, x);
    CHECK(rep.skipped_kink > 0); // the zero input entry flips its mask under +/-eps
    CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("gradcheck: rejects eps outside [1e-7, 1e-3]") {
    ModelParams m = build_model({LayerSpec::dense(1)}, {2}, 51);
    GradCheckConfig cfg;
    cfg.eps = 1e-8;
    CHECK_THROWS_AS(gradient_check(m, random_tensor({1, 2}, 52), cfg), dimension_error);
    cfg.eps = 1e-2;
    CHECK_THROWS_AS(gradient_check(m, random_tensor({1, 2}, 52), cfg), dimension_error);
}

TEST_CASE("determinism: same seed gives bit-identical models and training") {
    const std::vector<LayerSpec> specs = {LayerSpec::conv1d(4, 3), LayerSpec::batchnorm(), LayerSpec::relu(),
                                          LayerSpec::dense(6)};
    auto run = [&specs]() {
        ModelParams m = build_model(specs, {2, 8}, 2024);
        AdamState st = make_adam_state(m);
        Tensor x = random_tensor({4, 2, 8}, 7);
        Tensor y = random_tensor({4, 6}, 8);
        for (int i = 0; i < 5; ++i) {
            ForwardTrace trace;
            Tensor out = forward(m, x, Mode::train, &trace);
            MseResult loss = mse_loss(out, y);
            Gradients g = backward(m, trace, loss.grad);
            adam_step(m, g, st, AdamConfig{});
        }
        return m;
    };
    CHECK(bitwise_equal(run(), run()));
}

TEST_CASE("checkpoint: save/load round-trips bit-exactly") {
    const std::vector<LayerSpec> specs = {LayerSpec::conv1d(3, 3, 2), LayerSpec::batchnorm(), LayerSpec::relu(),
                                          LayerSpec::conv1d_transpose(2, 3, 2), LayerSpec::dense(4)};
    ModelParams m = build_model(specs, {2, 8}, 314);
    forward(m, random_tensor({3, 2, 8}, 1), Mode::train); // move running stats off init
    TrainProvenance prov{987654321ULL, 0.7, 112000ULL};

    const std::string path = "build_test_ckpt.ctwm";
    save_checkpoint(path, m, prov);
    TrainProvenance got_prov;
    ModelParams loaded = load_checkpoint(path, &got_prov);

    CHECK(bitwise_equal(m, loaded));
    CHECK(got_prov.dataset_seed == prov.dataset_seed);
    CHECK(got_prov.split == prov.split);
    CHECK(got_prov.realizations == prov.realizations);

    Tensor x = random_tensor({2, 2, 8}, 5);
    CHECK(bitwise_equal(infer(m, x), infer(loaded, x)));

    // Saving the loaded model reproduces the identical byte stream.
    const std::string path2 = "build_test_ckpt2.ctwm";
    save_checkpoint(path2, loaded, got_prov);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(!s1.empty());
    CHECK(s1.substr(0, 4) == "CTWM");
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("checkpoint: bad magic is rejected") {
    const std::string path = "build_test_badmagic.bin";
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE0000";
    }
    CHECK_THROWS_AS(load_checkpoint(path), numeric_error);
    std::remove(path.c_str());
}
