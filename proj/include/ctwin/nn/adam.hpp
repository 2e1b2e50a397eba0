#pragma once

#include <cstdint>

#include "ctwin/nn/layers.hpp"

namespace ctwin::nn {

// Adam configuration. Defaults follow the usual first/second-moment decay
// rates; the learning rate matches the corrector training setup.
struct AdamConfig {
    double learning_rate = 8e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter first/second moment accumulators, laid out to mirror the
// model's layers.
struct AdamState {
    std::vector<LayerGrads> m;
    std::vector<LayerGrads> v;
    std::uint64_t step = 0;
};

AdamState make_adam_state(const ModelParams &params);

// One Adam update in place. Throws numeric_error if any gradient entry is
// non-finite (the optimizer state is left untouched in that case).
void adam_step(ModelParams &params, const Gradients &grads, AdamState &state, const AdamConfig &cfg);

} // namespace ctwin::nn
