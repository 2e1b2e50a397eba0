#ifndef CTWIN_NN_LAYERS_HPP
#define CTWIN_NN_LAYERS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ctwin/nn/tensor.hpp"

namespace ctwin::nn {

enum class LayerKind : std::uint8_t {
    conv1d = 0,
    conv1d_transpose = 1,
    batchnorm = 2,
    relu = 3,
    dense = 4,
};

const char *layer_kind_name(LayerKind k);

/// Structural description of one layer. Convolutions use "same" zero padding
/// of (kernel_size-1)/2 per side, hence kernel_size must be odd; at stride 1
/// the output length equals the input length, a stride-2 transpose doubles it.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t kernel_count = 0; // output channels (conv kinds)
    std::size_t kernel_size = 0;  // odd (conv kinds)
    std::size_t stride = 1;
    std::size_t output_width = 0; // dense only

    static LayerSpec conv1d(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1);
    static LayerSpec conv1d_transpose(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1);
    static LayerSpec batchnorm();
    static LayerSpec relu();
    static LayerSpec dense(std::size_t output_width);
};

/// One layer's state. Unused tensors stay empty (relu has none; only
/// batchnorm carries running statistics, with weights=gamma and bias=beta).
struct Layer {
    LayerSpec spec;
    Tensor weights;
    Tensor bias;
    Tensor running_mean;
    Tensor running_var;
};

struct ModelParams {
    std::vector<Layer> layers;
    std::size_t layer_count() const { return layers.size(); }
};

enum class Mode { train, infer };

/// Shape (without the leading batch dimension) a layer produces for a given
/// input shape. Throws dimension_error naming the layer index on mismatch.
std::vector<std::size_t> infer_output_shape(const LayerSpec &spec, const std::vector<std::size_t> &in,
                                            std::size_t layer_index);

/// Builds a model from a layer chain, inferring every weight shape from
/// input_shape (without batch dimension). He fan-in normal initialization,
/// deterministic under the seed; batchnorm starts at gamma=1, beta=0,
/// running mean 0 / var 1.
ModelParams build_model(const std::vector<LayerSpec> &specs, const std::vector<std::size_t> &input_shape,
                        std::uint64_t seed);

/// Retained intermediates of one forward pass, consumed by backward().
struct ForwardTrace {
    std::vector<Tensor> inputs;       // input of each layer
    std::vector<Tensor> batch_mean;   // batchnorm layers: batch statistics
    std::vector<Tensor> batch_var;
    Tensor output;
    Mode mode = Mode::train;
    bool valid = false;
};

/// Runs the layer chain in order. Train mode uses batch statistics in
/// batchnorm and updates the running statistics in params; infer mode reads
/// the running statistics and leaves params untouched. Pass a trace to retain
/// intermediates for backward().
Tensor forward(ModelParams &params, const Tensor &input, Mode mode, ForwardTrace *trace = nullptr);

/// Inference-only forward on const params.
Tensor infer(const ModelParams &params, const Tensor &input);

struct LayerGrads {
    Tensor weights;
    Tensor bias;
};

struct Gradients {
    std::vector<LayerGrads> layers;
    Tensor input;
};

Gradients zero_gradients(const ModelParams &params);

/// Reverse accumulation through the trace of a previous train-mode forward.
/// Throws state_error if the trace is missing or was made in infer mode.
Gradients backward(const ModelParams &params, const ForwardTrace &trace, const Tensor &grad_output);

/// Mean squared error over all elements plus its gradient 2(pred-target)/N.
struct MseResult {
    double loss;
    Tensor grad;
};
MseResult mse_loss(const Tensor &pred, const Tensor &target);

} // namespace ctwin::nn

#endif
