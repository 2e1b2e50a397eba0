#ifndef CTWIN_FFT_HPP
#define CTWIN_FFT_HPP

#include <vector>

#include "ctwin/common.hpp"

namespace ctwin {

/// In-place radix-2 DFT, no scaling. inverse=false computes
/// X[k] = sum_n x[n] e^{-j 2 pi k n / N}; inverse=true uses e^{+j...}.
/// Length must be a power of two.
void fft_radix2(std::vector<cplx> &x, bool inverse);

/// Unitary transforms (1/sqrt(N) both directions), as used on the signal path.
std::vector<cplx> fft_unitary(std::vector<cplx> x);
std::vector<cplx> ifft_unitary(std::vector<cplx> x);

} // namespace ctwin

#endif
