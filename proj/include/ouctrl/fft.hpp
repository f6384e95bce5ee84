#pragma once

#include "ouctrl/kernels.hpp"

namespace ouctrl::fft {

// Unnormalized c2c DFT (FFTW sign convention). Plans are cached per
// (dims, sign), created with FFTW_ESTIMATE only so planning is deterministic,
// and executed via the new-array interface; in == out is allowed.
void dft(int rank, const int* dims, const kern::cplx* in, kern::cplx* out, int sign);

inline constexpr int kForward = -1;
inline constexpr int kBackward = +1;

} // namespace ouctrl::fft
