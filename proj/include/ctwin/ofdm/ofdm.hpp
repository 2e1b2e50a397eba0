#pragma once

#include <cstdint>
#include <vector>

#include "ctwin/common.hpp"

namespace ctwin::ofdm {

// Constellation family. Square M-QAM covers QPSK (M=4); BPSK is the single
// real axis. All constellations are Gray-labeled and scaled to unit average
// symbol energy.
struct Modulation {
    enum class Kind { bpsk, qam } kind = Kind::qam;
    unsigned order = 4; // constellation size M

    static Modulation bpsk() { return {Kind::bpsk, 2}; }
    static Modulation qpsk() { return {Kind::qam, 4}; }
    static Modulation mqam(unsigned m);

    unsigned bits_per_symbol() const;
    bool operator==(const Modulation &) const = default;
};

struct OfdmConfig {
    std::size_t subcarrier_count = 128; // N_s, power of two
    std::size_t cp_length = 16;         // tau, samples
    double sample_rate = 30.72e6;       // F_s, Hz
    Modulation modulation = Modulation::qpsk();

    std::size_t frame_length() const { return subcarrier_count + cp_length; }
    void validate() const; // throws dimension_error on violated invariants
};

// Per-antenna channel impulse response on the 1/F_s tap grid.
struct Cir {
    std::vector<std::vector<cplx>> taps; // [antenna][tap]

    std::size_t antenna_count() const { return taps.size(); }
    std::size_t tap_count() const; // common length eta after zero padding
    Cir padded() const;            // all antennas zero-padded to tap_count()
};

// Per-antenna frequency response H_k^t, values[t][k] with k = 0..N_s-1.
struct FreqResponse {
    std::vector<std::vector<cplx>> values; // [antenna][subcarrier]

    std::size_t antenna_count() const { return values.size(); }
    std::size_t subcarrier_count() const { return values.empty() ? 0 : values[0].size(); }
};

// Additive complex Gaussian noise level. The effective SNR convention is
// snr = 1/noise_variance (unit average symbol energy), so from_snr_db(0)
// gives variance 1. Zero variance disables noise.
struct NoiseConfig {
    double noise_variance = 0.0;

    static NoiseConfig off() { return {0.0}; }
    static NoiseConfig from_snr_linear(double snr);
    static NoiseConfig from_snr_db(double snr_db);
};

// --- bit/symbol mapping ---

std::vector<cplx> map_bits(const std::vector<std::uint8_t> &bits, const Modulation &mod);
std::vector<std::uint8_t> demap_symbols(const std::vector<cplx> &symbols, const Modulation &mod);

// Enumerates the constellation in label order (index = Gray-labeled bits
// packed MSB-first). Used by tests and docs.
std::vector<cplx> constellation(const Modulation &mod);

// --- OFDM chain ---

// Unitary inverse DFT of the N_s symbols, then cyclic prefix prepend (last
// tau samples copied to the front). Returns N_s + tau samples.
std::vector<cplx> ofdm_modulate(const std::vector<cplx> &symbols, const OfdmConfig &cfg);

// Drops the first tau samples and applies the unitary DFT.
std::vector<cplx> ofdm_demodulate(const std::vector<cplx> &frame, const OfdmConfig &cfg);

// y[n] = sum_t (x_t conv h_t)[n] + w[n], linear convolution truncated to the
// frame length; w is circularly-symmetric Gaussian with the configured
// variance per complex sample, drawn deterministically from the seed. Warns
// (once per call, to stderr) when the CIR exceeds the CP so residual ISI is
// present.
std::vector<cplx> apply_channel(const std::vector<std::vector<cplx>> &frames, const Cir &cir,
                                const NoiseConfig &noise, std::uint64_t seed, const OfdmConfig &cfg);

// --- equalization / detection ---

struct EqualizedGrid {
    std::vector<cplx> symbols;
    std::vector<std::uint8_t> erased; // 1 where |H_eff| fell below the floor
};

// Zero-forcing: S_hat_k = Y_k / H_eff_k; subcarriers with |H_eff| < 1e-12
// are flagged erased and their symbol forced to 0 instead of dividing.
EqualizedGrid zf_equalize(const std::vector<cplx> &received, const std::vector<cplx> &h_eff);

double ber(const std::vector<std::uint8_t> &bits, const std::vector<std::uint8_t> &bits_hat);

// Non-unitary N_s-point DFT of the zero-padded CIR taps per antenna, so a
// single unit tap gives H_k = 1 on every subcarrier.
FreqResponse cir_to_cfr(const Cir &cir, std::size_t subcarrier_count);

// Gaussian tail probability Q(x), the analytic BER oracle for Gray QPSK over
// a flat unit channel: BER = Q(sqrt(snr)).
double q_function(double x);

} // namespace ctwin::ofdm
