#include "looplens/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>

namespace looplens::kernels {

namespace scalar {

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = x[i] - mean;
        acc += d * d;
    }
    return acc;
}

double gather_dot(const std::int32_t* idx, const double* w, std::size_t k, const double* y) {
    double acc = 0.0;
    for (std::size_t t = 0; t < k; ++t) acc += w[t] * y[idx[t]];
    return acc;
}

void scale_shift(const double* x, std::size_t n, double shift, double scale, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - shift) * scale;
}

} // namespace scalar

#if defined(LOOPLENS_HAVE_AVX2_TU) && defined(__x86_64__)
#define LOOPLENS_AVX2_AVAILABLE 1
namespace avx2 {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sum_sq_dev(const double* x, std::size_t n, double mean);
double gather_dot(const std::int32_t* idx, const double* w, std::size_t k, const double* y);
void scale_shift(const double* x, std::size_t n, double shift, double scale, double* out);
} // namespace avx2
#endif

namespace {

struct Table {
    double (*sum)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*sum_sq_dev)(const double*, std::size_t, double);
    double (*gather_dot)(const std::int32_t*, const double*, std::size_t, const double*);
    void (*scale_shift)(const double*, std::size_t, double, double, double*);
};

constexpr Table kScalarTable{scalar::sum, scalar::dot, scalar::axpy,
                             scalar::sum_sq_dev, scalar::gather_dot, scalar::scale_shift};

#ifdef LOOPLENS_AVX2_AVAILABLE
constexpr Table kAvx2Table{avx2::sum, avx2::dot, avx2::axpy,
                           avx2::sum_sq_dev, avx2::gather_dot, avx2::scale_shift};
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend pick_default() {
#ifdef LOOPLENS_AVX2_AVAILABLE
    const char* env = std::getenv("LOOPLENS_SIMD");
    if (env && std::string_view(env) == "scalar") return Backend::scalar;
    if (cpu_has_avx2()) return Backend::avx2;
#endif
    return Backend::scalar;
}

std::atomic<Backend> g_backend{pick_default()};

const Table& table() {
#ifdef LOOPLENS_AVX2_AVAILABLE
    if (g_backend.load(std::memory_order_relaxed) == Backend::avx2) return kAvx2Table;
#endif
    return kScalarTable;
}

} // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

const char* backend_name() {
    return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

bool avx2_supported() {
#ifdef LOOPLENS_AVX2_AVAILABLE
    return cpu_has_avx2();
#else
    return false;
#endif
}

void force_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported())
        throw std::invalid_argument("avx2 backend not available on this cpu/build");
    g_backend.store(b, std::memory_order_relaxed);
}

void reset_backend() { g_backend.store(pick_default(), std::memory_order_relaxed); }

double sum(const double* x, std::size_t n) { return table().sum(x, n); }
double dot(const double* x, const double* y, std::size_t n) { return table().dot(x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }
double sum_sq_dev(const double* x, std::size_t n, double mean) { return table().sum_sq_dev(x, n, mean); }
double gather_dot(const std::int32_t* idx, const double* w, std::size_t k, const double* y) {
    return table().gather_dot(idx, w, k, y);
}
void scale_shift(const double* x, std::size_t n, double shift, double scale, double* out) {
    table().scale_shift(x, n, shift, scale, out);
}

} // namespace looplens::kernels
