// AVX2/FMA variants of the pointwise kernels. Complex arrays are treated as
// interleaved doubles; 4-wide lane accumulators are reduced in a fixed order
// (lane0+lane1, lane2+lane3, then the two halves) so results are
// deterministic on a given machine.

#include "ouctrl/kernels.hpp"

#include <immintrin.h>

namespace ouctrl::kern::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d pair = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(pair, pair);
    return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

// duplicate [w0 w1] -> [w0 w0 w1 w1]
inline __m256d dup_pairs(const double* w) {
    __m128d w2 = _mm_loadu_pd(w);
    return _mm256_permute4x64_pd(_mm256_castpd128_pd256(w2), 0b01010000);
}

} // namespace

void cmul_real(cplx* dst, const cplx* src, const double* w, std::size_t n) {
    auto* d = reinterpret_cast<double*>(dst);
    const auto* s = reinterpret_cast<const double*>(src);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d sv = _mm256_loadu_pd(s + 2 * i);
        _mm256_storeu_pd(d + 2 * i, _mm256_mul_pd(sv, dup_pairs(w + i)));
    }
    for (; i < n; ++i) dst[i] = src[i] * w[i];
}

void cmul_real_inplace(cplx* a, const double* w, std::size_t n) {
    cmul_real(a, a, w, n);
}

void cmul_cplx(cplx* dst, const cplx* src, const cplx* w, std::size_t n) {
    auto* d = reinterpret_cast<double*>(dst);
    const auto* s = reinterpret_cast<const double*>(src);
    const auto* ww = reinterpret_cast<const double*>(w);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d sv = _mm256_loadu_pd(s + 2 * i);              // [ar ai br bi]
        __m256d wv = _mm256_loadu_pd(ww + 2 * i);             // [cr ci dr di]
        __m256d wre = _mm256_movedup_pd(wv);                  // [cr cr dr dr]
        __m256d wim = _mm256_permute_pd(wv, 0b1111);          // [ci ci di di]
        __m256d sswap = _mm256_permute_pd(sv, 0b0101);        // [ai ar bi br]
        // (ar+i ai)(cr+i ci) = (ar cr - ai ci) + i(ar ci + ai cr)
        __m256d t = _mm256_mul_pd(sswap, wim);
        t = _mm256_mul_pd(t, _mm256_setr_pd(-1.0, 1.0, -1.0, 1.0));
        __m256d res = _mm256_fmadd_pd(sv, wre, t);
        _mm256_storeu_pd(d + 2 * i, res);
    }
    for (; i < n; ++i) dst[i] = src[i] * w[i];
}

void axpy(cplx* y, double a, const cplx* x, std::size_t n) {
    auto* yd = reinterpret_cast<double*>(y);
    const auto* xd = reinterpret_cast<const double*>(x);
    const std::size_t m = 2 * n;
    __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        __m256d yv = _mm256_loadu_pd(yd + i);
        __m256d xv = _mm256_loadu_pd(xd + i);
        _mm256_storeu_pd(yd + i, _mm256_fmadd_pd(av, xv, yv));
    }
    for (; i < m; ++i) yd[i] += a * xd[i];
}

void xpay(cplx* p, double beta, const cplx* r, std::size_t n) {
    auto* pd = reinterpret_cast<double*>(p);
    const auto* rd = reinterpret_cast<const double*>(r);
    const std::size_t m = 2 * n;
    __m256d bv = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        __m256d pv = _mm256_loadu_pd(pd + i);
        __m256d rv = _mm256_loadu_pd(rd + i);
        _mm256_storeu_pd(pd + i, _mm256_fmadd_pd(bv, pv, rv));
    }
    for (; i < m; ++i) pd[i] = rd[i] + beta * pd[i];
}

double dot_re(const cplx* a, const cplx* b, std::size_t n) {
    const auto* ad = reinterpret_cast<const double*>(a);
    const auto* bd = reinterpret_cast<const double*>(b);
    const std::size_t m = 2 * n;
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(ad + i), _mm256_loadu_pd(bd + i), acc);
    }
    double s = hsum(acc);
    for (; i < m; ++i) s += ad[i] * bd[i];
    return s;
}

double norm_sq(const cplx* a, std::size_t n) {
    const auto* ad = reinterpret_cast<const double*>(a);
    const std::size_t m = 2 * n;
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        __m256d v = _mm256_loadu_pd(ad + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double s = hsum(acc);
    for (; i < m; ++i) s += ad[i] * ad[i];
    return s;
}

double masked_norm_sq(const cplx* a, const double* mask, std::size_t n) {
    const auto* ad = reinterpret_cast<const double*>(a);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d v = _mm256_loadu_pd(ad + 2 * i);
        acc = _mm256_fmadd_pd(_mm256_mul_pd(v, v), dup_pairs(mask + i), acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i)
        s += mask[i] * (a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
    return s;
}

} // namespace ouctrl::kern::avx2
