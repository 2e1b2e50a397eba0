#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctwin/nn/adam.hpp"
#include "ctwin/nn/checkpoint.hpp"
#include "ctwin/nn/layers.hpp"
#include "ctwin/twin/dataset.hpp"

namespace ctwin::twin {

enum class ModelKind : std::uint8_t { encoder_decoder, mlp };

const char *model_kind_name(ModelKind k);

// Architecture and training knobs. The encoder compresses the length-P
// two-channel sequence with stride-2 convolutions (channels growing
// 16 -> 32 -> 64 -> 128, capped), the decoder mirrors it with stride-2
// transpose convolutions, and a 1x1 convolution plus a dense layer regress
// the 2P outputs. The MLP baseline is mlp_layers dense layers (hidden width
// mlp_width, ReLU) ending in a dense 2P regressor.
struct CorrectorConfig {
    std::size_t encoder_blocks = 5; // conv blocks, >= 2
    std::size_t decoder_blocks = 5; // transpose-conv blocks, >= 2
    std::size_t base_channels = 16; // channels of the first encoder block
    std::size_t max_channels = 128; // channel growth cap
    std::size_t kernel_size = 3;    // odd

    std::size_t mlp_layers = 5; // total dense layers in the baseline
    std::size_t mlp_width = 64; // hidden width (the reference leaves it open)

    std::size_t epochs = 200;          // upper bound U
    std::size_t batches_per_epoch = 0; // V; 0 = one full pass over the train set
    std::size_t batch_size = 256;
    double learning_rate = 8e-4; // xi
    std::size_t patience = 20;   // early stop after this many epochs without
                                 // validation improvement; 0 disables
    double validation_fraction = 0.1; // tail of the train split held out for
                                      // early stopping (test stays untouched)
    std::uint64_t seed = 0;

    void validate() const;
};

// Layer chain for a given model kind and tap count (input shape [2, P]).
std::vector<nn::LayerSpec> corrector_spec(ModelKind kind, const CorrectorConfig &cfg, std::size_t taps);

struct EpochStats {
    double train_mse = 0.0; // mean over the batches actually trained on
    double val_mse = 0.0;   // infer-mode MSE on the validation subset
};

struct TrainResult {
    nn::ModelParams params; // best-validation parameters (last finite ones
                            // when training aborted on divergence)
    std::vector<EpochStats> log;
    bool aborted = false;      // loss went non-finite
    std::size_t best_epoch = 0; // 1-based epoch the returned params come from
    nn::TrainProvenance provenance;
};

// Trains a corrector on the training split of a scaled dataset (max entry
// magnitude 1) by minimizing the MSE against h_real with Adam. Deterministic
// per config seed. Returns per-epoch train/validation MSE; on divergence the
// last finite parameters are returned with aborted=true.
TrainResult train_corrector(const Dataset &dataset, const CorrectorConfig &cfg, ModelKind kind);

// Corrected CIR for one scaled realization: infer-mode forward pass,
// de-scaled by scale_factor, reassembled into complex taps. Pure function.
std::vector<cplx> predict(const nn::ModelParams &params, const std::vector<cplx> &h_rt, double scale_factor);

// Table of the two evaluation cases over the test split:
//   case1: NMSE(h_real, h_rt)   - the uncorrected twin against the truth
//   case2: NMSE(h_real, h_pred) - the corrected twin against the truth
// The primary aggregate averages per-realization NMSE in the dB domain; the
// ratio-domain aggregate (10*log10 of the mean power ratio) is also kept.
struct CaseReport {
    double case1_db = 0.0;
    double case2_db = 0.0;
    double case1_ratio_db = 0.0;
    double case2_ratio_db = 0.0;
    std::size_t count = 0; // test realizations evaluated
};

CaseReport evaluate_cases(const Dataset &dataset, const nn::ModelParams &params);

} // namespace ctwin::twin
