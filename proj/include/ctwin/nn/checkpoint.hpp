#pragma once

#include <cstdint>
#include <string>

#include "ctwin/nn/layers.hpp"

namespace ctwin::nn {

// Provenance of the dataset a model was trained on, stored in the checkpoint
// so evaluation can re-derive the train/test split and refuse leaked indices.
struct TrainProvenance {
    std::uint64_t dataset_seed = 0;
    double split = 0.0;          // training fraction, 0 when untrained
    std::uint64_t realizations = 0;
};

// Model checkpoint file ("CTWM", version 1):
//   magic "CTWM" | u32 version | u32 layer_count
//   per layer: u8 kind | u32 kernel_count | u32 kernel_size | u32 stride |
//              u32 output_width | 4 tensors (weights, bias, running_mean,
//              running_var), each u32 rank | rank*u64 dims | f64[] data
//   trailer: u64 dataset_seed | f64 split | u64 realizations
// All scalars little-endian; doubles are raw IEEE-754 bits, so the
// round-trip is bit-exact.
void save_checkpoint(const std::string &path, const ModelParams &params, const TrainProvenance &prov);

ModelParams load_checkpoint(const std::string &path, TrainProvenance *prov = nullptr);

} // namespace ctwin::nn
