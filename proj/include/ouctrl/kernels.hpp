#pragma once

#include <complex>
#include <cstddef>

// Pointwise array kernels used by the spectral inner loops (propagator
// application, masked energies, CG vector updates).  Scalar reference
// implementations always exist; AVX2 variants are selected at runtime when
// the CPU supports them.  Both paths are equivalence-tested; reductions use
// a fixed lane-then-horizontal order so results are machine-deterministic.

namespace ouctrl::kern {

using cplx = std::complex<double>;

enum class Isa { Scalar, Avx2 };

Isa active_isa();
bool isa_available(Isa isa);
// Testing hook. Throws ouctrl::Error if the requested ISA is unavailable.
void force_isa(Isa isa);

// dst[i] = src[i] * w[i], complex * real
void cmul_real(cplx* dst, const cplx* src, const double* w, std::size_t n);
// a[i] *= w[i]
void cmul_real_inplace(cplx* a, const double* w, std::size_t n);
// dst[i] = src[i] * w[i], complex * complex
void cmul_cplx(cplx* dst, const cplx* src, const cplx* w, std::size_t n);
// y[i] += a * x[i]
void axpy(cplx* y, double a, const cplx* x, std::size_t n);
// p[i] = r[i] + beta * p[i]
void xpay(cplx* p, double beta, const cplx* r, std::size_t n);
// sum of Re(conj(a[i]) * b[i])
double dot_re(const cplx* a, const cplx* b, std::size_t n);
// sum of |a[i]|^2
double norm_sq(const cplx* a, std::size_t n);
// sum of mask[i] * |a[i]|^2
double masked_norm_sq(const cplx* a, const double* mask, std::size_t n);

} // namespace ouctrl::kern
