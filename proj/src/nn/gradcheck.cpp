#include "ctwin/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ctwin/rng.hpp"

namespace ctwin::nn {

namespace {

// Bit pattern of every relu activation decision during a forward pass.
std::vector<std::uint8_t> relu_mask(const ModelParams &params, const ForwardTrace &trace) {
    std::vector<std::uint8_t> mask;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        if (params.layers[i].spec.kind != LayerKind::relu)
            continue;
        for (double v : trace.inputs[i].data)
            mask.push_back(v > 0.0 ? 1 : 0);
    }
    return mask;
}

struct Probe {
    double loss;
    std::vector<std::uint8_t> mask;
};

Probe probe_loss(ModelParams &params, const Tensor &input, const Tensor &target) {
    ForwardTrace trace;
    Tensor out = forward(params, input, Mode::train, &trace);
    return {mse_loss(out, target).loss, relu_mask(params, trace)};
}

} // namespace

GradCheckReport gradient_check(ModelParams &params, const Tensor &input, const GradCheckConfig &cfg) {
    if (cfg.eps < 1e-7 || cfg.eps > 1e-3)
        throw dimension_error("gradient_check: eps must lie in [1e-7, 1e-3]");

    // Snapshot so the repeated train-mode forwards leave the model untouched.
    const ModelParams snapshot = params;

    ForwardTrace trace;
    Tensor out = forward(params, input, Mode::train, &trace);
    Rng rng(cfg.target_seed);
    Tensor target = Tensor::zeros(out.shape);
    for (auto &v : target.data)
        v = rng.normal();

    MseResult base = mse_loss(out, target);
    Gradients grads = backward(params, trace, base.grad);

    GradCheckReport report;

    auto check_entry = [&](double &slot, double analytic) {
        const double saved = slot;
        slot = saved + cfg.eps;
        Probe plus = probe_loss(params, input, target);
        slot = saved - cfg.eps;
        Probe minus = probe_loss(params, input, target);
        slot = saved;
        if (plus.mask != minus.mask) {
            report.skipped_kink += 1;
            return;
        }
        const double numeric = (plus.loss - minus.loss) / (2.0 * cfg.eps);
        const double scale = std::max(std::abs(analytic), std::abs(numeric));
        if (scale < cfg.magnitude_floor) {
            report.skipped_tiny += 1;
            return;
        }
        report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic - numeric) / scale);
        report.compared += 1;
    };

    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        Layer &ly = params.layers[li];
        for (std::size_t i = 0; i < ly.weights.size(); ++i)
            check_entry(ly.weights.data[i], grads.layers[li].weights.data[i]);
        for (std::size_t i = 0; i < ly.bias.size(); ++i)
            check_entry(ly.bias.data[i], grads.layers[li].bias.data[i]);
    }

    if (cfg.check_input) {
        Tensor probe_input = input;
        for (std::size_t i = 0; i < probe_input.size(); ++i) {
            const double saved = probe_input.data[i];
            probe_input.data[i] = saved + cfg.eps;
            Probe plus = probe_loss(params, probe_input, target);
            probe_input.data[i] = saved - cfg.eps;
            Probe minus = probe_loss(params, probe_input, target);
            probe_input.data[i] = saved;
            if (plus.mask != minus.mask) {
                report.skipped_kink += 1;
                continue;
            }
            const double numeric = (plus.loss - minus.loss) / (2.0 * cfg.eps);
            const double analytic = grads.input.data[i];
            const double scale = std::max(std::abs(analytic), std::abs(numeric));
            if (scale < cfg.magnitude_floor) {
                report.skipped_tiny += 1;
                continue;
            }
            report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic - numeric) / scale);
            report.compared += 1;
        }
    }

    params = snapshot;
    return report;
}

} // namespace ctwin::nn
