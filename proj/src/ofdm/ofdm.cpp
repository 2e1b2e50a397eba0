#include "ctwin/ofdm/ofdm.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "ctwin/fft.hpp"
#include "ctwin/rng.hpp"

namespace ctwin::ofdm {

namespace {

unsigned gray_encode(unsigned n) { return n ^ (n >> 1); }

unsigned gray_decode(unsigned g) {
    unsigned b = g;
    while (g >>= 1)
        b ^= g;
    return b;
}

unsigned int_log2(unsigned v) {
    unsigned r = 0;
    while (v > 1) {
        v >>= 1;
        ++r;
    }
    return r;
}

// Amplitude of axis level p (p = 0..L-1) for an L-level Gray axis, before
// the unit-energy normalization: L-1, L-3, ..., -(L-1).
double axis_amplitude(unsigned position, unsigned levels) {
    return static_cast<double>(levels - 1) - 2.0 * static_cast<double>(position);
}

} // namespace

Modulation Modulation::mqam(unsigned m) {
    Modulation mod{Kind::qam, m};
    const unsigned bits = int_log2(m);
    if (m < 4 || (1u << bits) != m || bits % 2 != 0)
        throw dimension_error("mqam: order must be a square power of two (4, 16, 64, ...)");
    return mod;
}

unsigned Modulation::bits_per_symbol() const {
    if (kind == Kind::bpsk)
        return 1;
    return int_log2(order);
}

void OfdmConfig::validate() const {
    if (!is_power_of_two(subcarrier_count))
        throw dimension_error("ofdm config: subcarrier count must be a power of two");
    if (cp_length >= subcarrier_count)
        throw dimension_error("ofdm config: cyclic prefix must be shorter than the symbol");
    if (sample_rate <= 0.0)
        throw dimension_error("ofdm config: sample rate must be positive");
    if (modulation.kind == Modulation::Kind::qam)
        Modulation::mqam(modulation.order); // re-checks the square power-of-two invariant
}

std::size_t Cir::tap_count() const {
    std::size_t eta = 0;
    for (const auto &t : taps)
        eta = std::max(eta, t.size());
    return eta;
}

Cir Cir::padded() const {
    Cir out = *this;
    const std::size_t eta = tap_count();
    for (auto &t : out.taps)
        t.resize(eta, cplx(0.0, 0.0));
    return out;
}

NoiseConfig NoiseConfig::from_snr_linear(double snr) {
    if (snr <= 0.0)
        throw dimension_error("noise config: snr must be positive");
    return {1.0 / snr};
}

NoiseConfig NoiseConfig::from_snr_db(double snr_db) { return from_snr_linear(std::pow(10.0, snr_db / 10.0)); }

std::vector<cplx> constellation(const Modulation &mod) {
    const unsigned bps = mod.bits_per_symbol();
    std::vector<cplx> points(1u << bps);
    for (unsigned label = 0; label < points.size(); ++label) {
        if (mod.kind == Modulation::Kind::bpsk) {
            points[label] = cplx(label == 0 ? 1.0 : -1.0, 0.0);
            continue;
        }
        const unsigned half = bps / 2;
        const unsigned levels = 1u << half;
        const unsigned i_label = label >> half;          // first half of the bits
        const unsigned q_label = label & (levels - 1);   // second half
        const double norm = std::sqrt(2.0 * (static_cast<double>(mod.order) - 1.0) / 3.0);
        points[label] = cplx(axis_amplitude(gray_decode(i_label), levels) / norm,
                             axis_amplitude(gray_decode(q_label), levels) / norm);
    }
    return points;
}

std::vector<cplx> map_bits(const std::vector<std::uint8_t> &bits, const Modulation &mod) {
    const unsigned bps = mod.bits_per_symbol();
    if (bits.size() % bps != 0)
        throw dimension_error("map_bits: bit count " + std::to_string(bits.size()) +
                              " not divisible by bits per symbol " + std::to_string(bps));
    const std::vector<cplx> points = constellation(mod);
    std::vector<cplx> symbols(bits.size() / bps);
    for (std::size_t s = 0; s < symbols.size(); ++s) {
        unsigned label = 0;
        for (unsigned b = 0; b < bps; ++b)
            label = (label << 1) | (bits[s * bps + b] ? 1u : 0u);
        symbols[s] = points[label];
    }
    return symbols;
}

std::vector<std::uint8_t> demap_symbols(const std::vector<cplx> &symbols, const Modulation &mod) {
    const unsigned bps = mod.bits_per_symbol();
    std::vector<std::uint8_t> bits(symbols.size() * bps);
    if (mod.kind == Modulation::Kind::bpsk) {
        for (std::size_t s = 0; s < symbols.size(); ++s)
            bits[s] = symbols[s].real() < 0.0 ? 1 : 0;
        return bits;
    }
    const unsigned half = bps / 2;
    const unsigned levels = 1u << half;
    const double norm = std::sqrt(2.0 * (static_cast<double>(mod.order) - 1.0) / 3.0);
    auto slice_axis = [&](double v) -> unsigned {
        // Nearest level position for amplitude grid (L-1-2p)/norm.
        const double p = (static_cast<double>(levels - 1) - v * norm) / 2.0;
        const long rounded = std::lround(p);
        const long clamped = std::clamp(rounded, 0l, static_cast<long>(levels - 1));
        return gray_encode(static_cast<unsigned>(clamped));
    };
    for (std::size_t s = 0; s < symbols.size(); ++s) {
        const unsigned i_label = slice_axis(symbols[s].real());
        const unsigned q_label = slice_axis(symbols[s].imag());
        const unsigned label = (i_label << half) | q_label;
        for (unsigned b = 0; b < bps; ++b)
            bits[s * bps + b] = (label >> (bps - 1 - b)) & 1u;
    }
    return bits;
}

std::vector<cplx> ofdm_modulate(const std::vector<cplx> &symbols, const OfdmConfig &cfg) {
    cfg.validate();
    if (symbols.size() != cfg.subcarrier_count)
        throw dimension_error("ofdm_modulate: expected " + std::to_string(cfg.subcarrier_count) + " symbols, got " +
                              std::to_string(symbols.size()));
    std::vector<cplx> time = ifft_unitary(symbols);
    std::vector<cplx> frame(cfg.frame_length());
    for (std::size_t i = 0; i < cfg.cp_length; ++i)
        frame[i] = time[cfg.subcarrier_count - cfg.cp_length + i];
    std::copy(time.begin(), time.end(), frame.begin() + static_cast<std::ptrdiff_t>(cfg.cp_length));
    return frame;
}

std::vector<cplx> ofdm_demodulate(const std::vector<cplx> &frame, const OfdmConfig &cfg) {
    cfg.validate();
    if (frame.size() != cfg.frame_length())
        throw dimension_error("ofdm_demodulate: expected frame of " + std::to_string(cfg.frame_length()) +
                              " samples, got " + std::to_string(frame.size()));
    std::vector<cplx> body(frame.begin() + static_cast<std::ptrdiff_t>(cfg.cp_length), frame.end());
    return fft_unitary(std::move(body));
}

std::vector<cplx> apply_channel(const std::vector<std::vector<cplx>> &frames, const Cir &cir,
                                const NoiseConfig &noise, std::uint64_t seed, const OfdmConfig &cfg) {
    cfg.validate();
    if (frames.size() != cir.antenna_count())
        throw dimension_error("apply_channel: " + std::to_string(frames.size()) + " frames for " +
                              std::to_string(cir.antenna_count()) + " channel antennas");
    const std::size_t len = cfg.frame_length();
    for (const auto &f : frames)
        if (f.size() != len)
            throw dimension_error("apply_channel: frame length " + std::to_string(f.size()) + ", expected " +
                                  std::to_string(len));
    if (cir.tap_count() > cfg.cp_length + 1)
        std::cerr << "apply_channel: CIR length " << cir.tap_count() << " exceeds CP+1 = " << cfg.cp_length + 1
                  << "; residual inter-symbol interference is simulated\n";

    std::vector<cplx> y(len, cplx(0.0, 0.0));
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto &h = cir.taps[t];
        const auto &x = frames[t];
        for (std::size_t n = 0; n < len; ++n) {
            cplx acc(0.0, 0.0);
            const std::size_t mmax = std::min(h.size(), n + 1);
            for (std::size_t m = 0; m < mmax; ++m)
                acc += h[m] * x[n - m];
            y[n] += acc;
        }
    }
    if (noise.noise_variance > 0.0) {
        Rng rng(seed);
        for (std::size_t n = 0; n < len; ++n)
            y[n] += rng.cnormal(noise.noise_variance);
    } else if (noise.noise_variance < 0.0) {
        throw dimension_error("apply_channel: negative noise variance");
    }
    return y;
}

EqualizedGrid zf_equalize(const std::vector<cplx> &received, const std::vector<cplx> &h_eff) {
    if (received.size() != h_eff.size())
        throw dimension_error("zf_equalize: " + std::to_string(received.size()) + " received values vs " +
                              std::to_string(h_eff.size()) + " channel values");
    constexpr double kFloor = 1e-12;
    EqualizedGrid out;
    out.symbols.resize(received.size());
    out.erased.assign(received.size(), 0);
    for (std::size_t k = 0; k < received.size(); ++k) {
        if (std::abs(h_eff[k]) < kFloor) {
            out.symbols[k] = cplx(0.0, 0.0);
            out.erased[k] = 1;
        } else {
            out.symbols[k] = received[k] / h_eff[k];
        }
    }
    return out;
}

double ber(const std::vector<std::uint8_t> &bits, const std::vector<std::uint8_t> &bits_hat) {
    if (bits.size() != bits_hat.size())
        throw dimension_error("ber: length mismatch " + std::to_string(bits.size()) + " vs " +
                              std::to_string(bits_hat.size()));
    if (bits.empty())
        throw dimension_error("ber: empty bit sequences");
    std::size_t errors = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if ((bits[i] != 0) != (bits_hat[i] != 0))
            ++errors;
    return static_cast<double>(errors) / static_cast<double>(bits.size());
}

FreqResponse cir_to_cfr(const Cir &cir, std::size_t subcarrier_count) {
    if (!is_power_of_two(subcarrier_count))
        throw dimension_error("cir_to_cfr: subcarrier count must be a power of two");
    if (cir.tap_count() > subcarrier_count)
        throw dimension_error("cir_to_cfr: CIR length " + std::to_string(cir.tap_count()) +
                              " exceeds subcarrier count " + std::to_string(subcarrier_count));
    FreqResponse out;
    out.values.reserve(cir.antenna_count());
    for (const auto &taps : cir.taps) {
        std::vector<cplx> padded(subcarrier_count, cplx(0.0, 0.0));
        std::copy(taps.begin(), taps.end(), padded.begin());
        fft_radix2(padded, false); // non-unitary forward DFT
        out.values.push_back(std::move(padded));
    }
    return out;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

} // namespace ctwin::ofdm
