#include "ctwin/fft.hpp"

#include <cmath>

namespace ctwin {

void fft_radix2(std::vector<cplx> &x, bool inverse) {
    const std::size_t n = x.size();
    if (!is_power_of_two(n))
        throw dimension_error("fft: length " + std::to_string(n) + " is not a power of two");
    if (n == 1)
        return;

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1)
            j ^= bit;
        j ^= bit;
        if (i < j)
            std::swap(x[i], x[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = x[i + k];
                const cplx v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<cplx> fft_unitary(std::vector<cplx> x) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
    fft_radix2(x, false);
    for (auto &v : x)
        v *= scale;
    return x;
}

std::vector<cplx> ifft_unitary(std::vector<cplx> x) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
    fft_radix2(x, true);
    for (auto &v : x)
        v *= scale;
    return x;
}

} // namespace ctwin
