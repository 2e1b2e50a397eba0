#pragma once

#include <cstdint>
#include <vector>

#include "ctwin/ofdm/ofdm.hpp"

namespace ctwin::precode {

// Power handling of the precoder output.
//   raw:        the formula output is used unchanged (the transmit power then
//               depends on the channel estimate; this is the default because
//               it is what produces the MRT/MMSE performance gap).
//   unit_power: each subcarrier is scaled so sum_t |B_k^t|^2 = 1.
enum class Normalization { raw, unit_power };

// Shape of the MMSE precoder expression.
//   regularized: B_k^t = conj(H_k^t) / (sum_t |H_k^t|^2 + 1/P_t)  (default)
//   product:     B_k^t = conj(H_k^t) * (sum_t |H_k^t|^2 + 1/P_t), the
//                non-inverting variant, exposed for comparison only.
enum class MmseForm { regularized, product };

enum class PrecoderMode { mrt, mmse };

struct PowerConfig {
    double transmit_power = 1.0; // P_t per antenna, > 0
};

// Per-subcarrier per-antenna precoding weights, weights[t][k] matching the
// FreqResponse layout. zero_subcarriers flags k where the channel estimate
// was zero on every antenna (the precoder is zero there).
struct Precoder {
    std::vector<std::vector<cplx>> weights;
    PrecoderMode mode = PrecoderMode::mrt;
    Normalization normalization = Normalization::raw;
    std::vector<std::uint8_t> zero_subcarriers;

    std::size_t antenna_count() const { return weights.size(); }
    std::size_t subcarrier_count() const { return weights.empty() ? 0 : weights[0].size(); }
};

// Maximum-ratio transmission: B_k^t = conj(H_hat_k^t), optionally normalized.
Precoder mrt(const ofdm::FreqResponse &cfr_hat, Normalization norm = Normalization::raw);

// MMSE-style precoder, see MmseForm.
Precoder mmse(const ofdm::FreqResponse &cfr_hat, const PowerConfig &power, Normalization norm = Normalization::raw,
              MmseForm form = MmseForm::regularized);

// H_eff_k = sum_t B_k^t H_k^t, the scalar channel the receiver equalizes.
// cfr_true may differ from the estimate the precoder was built from; the gap
// between the two is exactly the model error under study.
std::vector<cplx> effective_channel(const Precoder &precoder, const ofdm::FreqResponse &cfr_true);

} // namespace ctwin::precode
