// AVX2 variants. Compiled with -mavx2 only; the dispatcher never selects
// these without a runtime cpu check. Multiplies and adds are kept separate
// (no FMA) so elementwise kernels match the scalar reference bit-for-bit.
#if defined(__x86_64__)

#include <immintrin.h>

#include <cstddef>
#include <cstdint>

namespace looplens::kernels::avx2 {

namespace {

inline double hsum256(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

} // namespace

double sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double total = hsum256(acc);
    for (; i < n; ++i) total += x[i];
    return total;
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d p = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_add_pd(acc, p);
    }
    double total = hsum256(acc);
    for (; i < n; ++i) total += x[i] * y[i];
    return total;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
    __m256d vm = _mm256_set1_pd(mean);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double total = hsum256(acc);
    for (; i < n; ++i) {
        double d = x[i] - mean;
        total += d * d;
    }
    return total;
}

double gather_dot(const std::int32_t* idx, const double* w, std::size_t k, const double* y) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t t = 0;
    for (; t + 4 <= k; t += 4) {
        __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + t));
        __m256d gathered = _mm256_i32gather_pd(y, vi, 8);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w + t), gathered));
    }
    double total = hsum256(acc);
    for (; t < k; ++t) total += w[t] * y[idx[t]];
    return total;
}

void scale_shift(const double* x, std::size_t n, double shift, double scale, double* out) {
    __m256d vshift = _mm256_set1_pd(shift);
    __m256d vscale = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vshift);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(d, vscale));
    }
    for (; i < n; ++i) out[i] = (x[i] - shift) * scale;
}

} // namespace looplens::kernels::avx2

#endif // __x86_64__
