#pragma once

#include <cstdint>

#include "ctwin/nn/layers.hpp"

namespace ctwin::nn {

// Central finite-difference validation of the analytic gradients.
//
// The loss is the MSE between the model output and a deterministic
// pseudorandom target drawn from target_seed, so the check needs no labels.
// Parameters whose +/-eps perturbations flip any relu activation mask are
// skipped: the loss is not differentiable across such a kink and the
// two-sided difference is meaningless there.
struct GradCheckConfig {
    double eps = 1e-5;                        // step size, must lie in [1e-7, 1e-3]
    double magnitude_floor = 1e-6;            // skip pairs where both sides are below this
    std::uint64_t target_seed = 0x5eedULL;    // seed for the synthetic regression target
    bool check_input = true;                  // also validate the gradient w.r.t. the input
};

struct GradCheckReport {
    double max_rel_error = 0.0;   // max |analytic - numeric| / max(|analytic|, |numeric|)
    std::size_t compared = 0;     // parameter entries actually compared
    std::size_t skipped_kink = 0; // entries excluded by the relu-mask test
    std::size_t skipped_tiny = 0; // entries excluded by the magnitude floor
};

GradCheckReport gradient_check(ModelParams &params, const Tensor &input, const GradCheckConfig &cfg = {});

} // namespace ctwin::nn
