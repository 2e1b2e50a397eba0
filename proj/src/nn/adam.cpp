#include "ctwin/nn/adam.hpp"

#include <cmath>

namespace ctwin::nn {

AdamState make_adam_state(const ModelParams &params) {
    AdamState st;
    st.m.reserve(params.layers.size());
    st.v.reserve(params.layers.size());
    for (const Layer &ly : params.layers) {
        LayerGrads zm, zv;
        if (!ly.weights.shape.empty()) {
            zm.weights = Tensor::zeros(ly.weights.shape);
            zv.weights = Tensor::zeros(ly.weights.shape);
        }
        if (!ly.bias.shape.empty()) {
            zm.bias = Tensor::zeros(ly.bias.shape);
            zv.bias = Tensor::zeros(ly.bias.shape);
        }
        st.m.push_back(std::move(zm));
        st.v.push_back(std::move(zv));
    }
    return st;
}

namespace {

void update_block(Tensor &param, const Tensor &grad, Tensor &m, Tensor &v, const AdamConfig &cfg, double bc1,
                  double bc2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data[i];
        m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
        v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        param.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

} // namespace

void adam_step(ModelParams &params, const Gradients &grads, AdamState &state, const AdamConfig &cfg) {
    if (grads.layers.size() != params.layers.size() || state.m.size() != params.layers.size())
        throw dimension_error("adam_step: gradient/state layer count does not match model");
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        if (!grads.layers[i].weights.all_finite() || !grads.layers[i].bias.all_finite())
            throw numeric_error("adam_step: non-finite gradient at layer " + std::to_string(i));
        if (grads.layers[i].weights.size() != params.layers[i].weights.size() ||
            grads.layers[i].bias.size() != params.layers[i].bias.size())
            throw dimension_error("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        Layer &ly = params.layers[i];
        if (ly.weights.size() > 0)
            update_block(ly.weights, grads.layers[i].weights, state.m[i].weights, state.v[i].weights, cfg, bc1, bc2);
        if (ly.bias.size() > 0)
            update_block(ly.bias, grads.layers[i].bias, state.m[i].bias, state.v[i].bias, cfg, bc1, bc2);
    }
}

} // namespace ctwin::nn
