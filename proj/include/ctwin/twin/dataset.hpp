#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctwin/common.hpp"
#include "ctwin/rt/scene.hpp"
#include "ctwin/rt/trace.hpp"

namespace ctwin::twin {

// Dataset bookkeeping. The raw tensor is S x A x P complex (positions x
// antennas x taps); each antenna CIR of length P is one realization, so
// R = S * A and every realization carries F = 2 features (real, imaginary).
struct DatasetMeta {
    std::uint64_t samples = 0;      // S: rx positions kept
    std::uint64_t antennas = 0;     // A
    std::uint64_t taps = 0;         // P per antenna
    std::uint64_t realizations = 0; // R = S * A
    std::uint32_t features = 2;     // F: real, imaginary
    double sample_rate = 30.72e6;   // tap grid the CIRs were binned on
    double scale_factor = 1.0;      // every stored entry has been divided by this
    double split = 0.7;             // train fraction
    std::uint64_t seed = 0;         // drives the train/test permutation

    void validate() const;
};

// One realization: the digital twin's (noisy) prediction of the channel and
// the ground-truth channel, both length P on a shared delay grid.
struct CirPair {
    std::vector<cplx> h_rt;
    std::vector<cplx> h_real;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<CirPair> pairs; // meta.realizations entries

    void validate() const;
};

// How to trace the two scenes for the paired dataset. The twin scene gets
// the twin config (typically a coarse or mis-modelled run), the truth scene
// the truth config (the oracle run).
struct BuildConfig {
    rt::TraceConfig twin_trace;
    rt::TraceConfig truth_trace;
    rt::ArrayConfig array;
    double sample_rate = 30.72e6;
    std::size_t taps = 16; // eta
    std::uint64_t seed = 0;
};

// Traces both scenes for every rx position and emits one CirPair per
// (position, antenna), positions outermost. Twin and truth CIRs of a
// position share a delay reference (the earlier first arrival of the two)
// so that the pair lives on one tap grid. Positions where either scene
// yields zero paths are skipped with a note on stderr. Deterministic.
// Throws dimension_error unless the scenes share tx and carrier.
Dataset build_dataset(const rt::Scene &twin_scene, const rt::Scene &truth_scene,
                      const std::vector<rt::Vec3> &rx_positions, const BuildConfig &cfg,
                      const rt::MaterialRegistry &registry);

// Divides every entry of every pair by the maximum absolute real/imaginary
// component over the whole dataset (both h_rt and h_real) and accumulates
// that factor into meta.scale_factor. Returns this pass's factor; scaling
// an already scaled dataset returns 1. Throws numeric_error if all entries
// are zero.
double scale_dataset(Dataset &dataset);

// Dataset file: magic "CTWD", version u32, then the metadata block
// (u64 S, u64 A, u64 P, u64 R, u32 F, f64 sample_rate, f64 scale_factor,
// f64 split, u64 seed), then R records. Each record stores h_rt as P reals
// followed by P imaginaries (matching the 2-channel network layout), then
// h_real likewise; all values little-endian 64-bit reals. Round trips are
// bit-exact.
void save_dataset(const std::string &path, const Dataset &dataset);
Dataset load_dataset(const std::string &path);

// Deterministic train/test membership: a Fisher-Yates permutation of
// [0, R) driven by meta.seed, cut at round(split * R). Disjoint and
// exhaustive by construction.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
SplitIndices split_indices(const DatasetMeta &meta);

// 10*log10(||ref - hat||^2 / ||ref||^2), clamped below at -100 dB.
// Throws dimension_error on length mismatch, numeric_error when the
// reference has no energy.
double nmse_db(const std::vector<cplx> &ref, const std::vector<cplx> &hat);

} // namespace ctwin::twin
