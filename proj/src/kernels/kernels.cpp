#include "ouctrl/kernels.hpp"
#include "ouctrl/errors.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace ouctrl::kern {

namespace scalar {

void cmul_real(cplx* dst, const cplx* src, const double* w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] * w[i];
}

void cmul_real_inplace(cplx* a, const double* w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] *= w[i];
}

void cmul_cplx(cplx* dst, const cplx* src, const cplx* w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] * w[i];
}

void axpy(cplx* y, double a, const cplx* x, std::size_t n) {
    auto* yd = reinterpret_cast<double*>(y);
    const auto* xd = reinterpret_cast<const double*>(x);
    for (std::size_t i = 0; i < 2 * n; ++i) yd[i] += a * xd[i];
}

void xpay(cplx* p, double beta, const cplx* r, std::size_t n) {
    auto* pd = reinterpret_cast<double*>(p);
    const auto* rd = reinterpret_cast<const double*>(r);
    for (std::size_t i = 0; i < 2 * n; ++i) pd[i] = rd[i] + beta * pd[i];
}

double dot_re(const cplx* a, const cplx* b, std::size_t n) {
    // Re(conj(a)b) summed == plain dot over the interleaved doubles
    const auto* ad = reinterpret_cast<const double*>(a);
    const auto* bd = reinterpret_cast<const double*>(b);
    double s = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) s += ad[i] * bd[i];
    return s;
}

double norm_sq(const cplx* a, std::size_t n) {
    const auto* ad = reinterpret_cast<const double*>(a);
    double s = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) s += ad[i] * ad[i];
    return s;
}

double masked_norm_sq(const cplx* a, const double* mask, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        s += mask[i] * (a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
    return s;
}

} // namespace scalar

#if OUCTRL_HAVE_AVX2
namespace avx2 {
void cmul_real(cplx*, const cplx*, const double*, std::size_t);
void cmul_real_inplace(cplx*, const double*, std::size_t);
void cmul_cplx(cplx*, const cplx*, const cplx*, std::size_t);
void axpy(cplx*, double, const cplx*, std::size_t);
void xpay(cplx*, double, const cplx*, std::size_t);
double dot_re(const cplx*, const cplx*, std::size_t);
double norm_sq(const cplx*, std::size_t);
double masked_norm_sq(const cplx*, const double*, std::size_t);
} // namespace avx2
#endif

namespace {

struct Vtable {
    void (*cmul_real)(cplx*, const cplx*, const double*, std::size_t);
    void (*cmul_real_inplace)(cplx*, const double*, std::size_t);
    void (*cmul_cplx)(cplx*, const cplx*, const cplx*, std::size_t);
    void (*axpy)(cplx*, double, const cplx*, std::size_t);
    void (*xpay)(cplx*, double, const cplx*, std::size_t);
    double (*dot_re)(const cplx*, const cplx*, std::size_t);
    double (*norm_sq)(const cplx*, std::size_t);
    double (*masked_norm_sq)(const cplx*, const double*, std::size_t);
};

constexpr Vtable kScalar = {
    scalar::cmul_real,  scalar::cmul_real_inplace, scalar::cmul_cplx,
    scalar::axpy,       scalar::xpay,              scalar::dot_re,
    scalar::norm_sq,    scalar::masked_norm_sq,
};

#if OUCTRL_HAVE_AVX2
constexpr Vtable kAvx2 = {
    avx2::cmul_real,  avx2::cmul_real_inplace, avx2::cmul_cplx,
    avx2::axpy,       avx2::xpay,              avx2::dot_re,
    avx2::norm_sq,    avx2::masked_norm_sq,
};
#endif

bool cpu_has_avx2() {
#if OUCTRL_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa pick_default() {
    if (const char* env = std::getenv("OUCTRL_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Isa::Avx2;
    }
    return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa> g_isa{pick_default()};

const Vtable& table() {
#if OUCTRL_HAVE_AVX2
    if (g_isa.load(std::memory_order_relaxed) == Isa::Avx2) return kAvx2;
#endif
    return kScalar;
}

} // namespace

Isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

bool isa_available(Isa isa) {
    return isa == Isa::Scalar || (isa == Isa::Avx2 && cpu_has_avx2());
}

void force_isa(Isa isa) {
    if (!isa_available(isa)) throw Error("kernels: requested ISA not available on this CPU/build");
    g_isa.store(isa, std::memory_order_relaxed);
}

void cmul_real(cplx* dst, const cplx* src, const double* w, std::size_t n) {
    table().cmul_real(dst, src, w, n);
}
void cmul_real_inplace(cplx* a, const double* w, std::size_t n) {
    table().cmul_real_inplace(a, w, n);
}
void cmul_cplx(cplx* dst, const cplx* src, const cplx* w, std::size_t n) {
    table().cmul_cplx(dst, src, w, n);
}
void axpy(cplx* y, double a, const cplx* x, std::size_t n) { table().axpy(y, a, x, n); }
void xpay(cplx* p, double beta, const cplx* r, std::size_t n) { table().xpay(p, beta, r, n); }
double dot_re(const cplx* a, const cplx* b, std::size_t n) { return table().dot_re(a, b, n); }
double norm_sq(const cplx* a, std::size_t n) { return table().norm_sq(a, n); }
double masked_norm_sq(const cplx* a, const double* mask, std::size_t n) {
    return table().masked_norm_sq(a, mask, n);
}

} // namespace ouctrl::kern
