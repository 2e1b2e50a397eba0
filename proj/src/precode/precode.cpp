#include "ctwin/precode/precode.hpp"

#include <cmath>

namespace ctwin::precode {

namespace {

void check_cfr(const ofdm::FreqResponse &cfr) {
    if (cfr.antenna_count() == 0 || cfr.subcarrier_count() == 0)
        throw dimension_error("precoder: empty channel response");
    for (const auto &row : cfr.values) {
        if (row.size() != cfr.subcarrier_count())
            throw dimension_error("precoder: ragged channel response");
        for (const cplx &v : row)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw numeric_error("precoder: non-finite channel response entry");
    }
}

void normalize_unit_power(Precoder &p) {
    const std::size_t nt = p.antenna_count(), ns = p.subcarrier_count();
    for (std::size_t k = 0; k < ns; ++k) {
        double power = 0.0;
        for (std::size_t t = 0; t < nt; ++t)
            power += std::norm(p.weights[t][k]);
        if (power <= 0.0)
            continue; // flagged zero subcarrier stays zero
        const double scale = 1.0 / std::sqrt(power);
        for (std::size_t t = 0; t < nt; ++t)
            p.weights[t][k] *= scale;
    }
}

void flag_zero_columns(Precoder &p, const ofdm::FreqResponse &cfr) {
    const std::size_t nt = cfr.antenna_count(), ns = cfr.subcarrier_count();
    p.zero_subcarriers.assign(ns, 0);
    for (std::size_t k = 0; k < ns; ++k) {
        bool all_zero = true;
        for (std::size_t t = 0; t < nt && all_zero; ++t)
            all_zero = cfr.values[t][k] == cplx(0.0, 0.0);
        if (all_zero)
            p.zero_subcarriers[k] = 1;
    }
}

} // namespace

Precoder mrt(const ofdm::FreqResponse &cfr_hat, Normalization norm) {
    check_cfr(cfr_hat);
    Precoder p;
    p.mode = PrecoderMode::mrt;
    p.normalization = norm;
    p.weights.reserve(cfr_hat.antenna_count());
    for (const auto &row : cfr_hat.values) {
        std::vector<cplx> w(row.size());
        for (std::size_t k = 0; k < row.size(); ++k)
            w[k] = std::conj(row[k]);
        p.weights.push_back(std::move(w));
    }
    flag_zero_columns(p, cfr_hat);
    if (norm == Normalization::unit_power)
        normalize_unit_power(p);
    return p;
}

Precoder mmse(const ofdm::FreqResponse &cfr_hat, const PowerConfig &power, Normalization norm, MmseForm form) {
    check_cfr(cfr_hat);
    if (power.transmit_power <= 0.0)
        throw dimension_error("mmse: transmit power must be positive");
    const std::size_t nt = cfr_hat.antenna_count(), ns = cfr_hat.subcarrier_count();
    Precoder p;
    p.mode = PrecoderMode::mmse;
    p.normalization = norm;
    p.weights.assign(nt, std::vector<cplx>(ns));
    for (std::size_t k = 0; k < ns; ++k) {
        double gain = 1.0 / power.transmit_power;
        for (std::size_t t = 0; t < nt; ++t)
            gain += std::norm(cfr_hat.values[t][k]);
        for (std::size_t t = 0; t < nt; ++t) {
            const cplx c = std::conj(cfr_hat.values[t][k]);
            p.weights[t][k] = form == MmseForm::regularized ? c / gain : c * gain;
        }
    }
    flag_zero_columns(p, cfr_hat);
    if (norm == Normalization::unit_power)
        normalize_unit_power(p);
    return p;
}

std::vector<cplx> effective_channel(const Precoder &precoder, const ofdm::FreqResponse &cfr_true) {
    if (precoder.antenna_count() != cfr_true.antenna_count() ||
        precoder.subcarrier_count() != cfr_true.subcarrier_count())
        throw dimension_error("effective_channel: precoder is " + std::to_string(precoder.antenna_count()) + "x" +
                              std::to_string(precoder.subcarrier_count()) + ", channel is " +
                              std::to_string(cfr_true.antenna_count()) + "x" +
                              std::to_string(cfr_true.subcarrier_count()));
    const std::size_t nt = precoder.antenna_count(), ns = precoder.subcarrier_count();
    std::vector<cplx> h_eff(ns, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < ns; ++k)
        for (std::size_t t = 0; t < nt; ++t)
            h_eff[k] += precoder.weights[t][k] * cfr_true.values[t][k];
    return h_eff;
}

} // namespace ctwin::precode
