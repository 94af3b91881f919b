#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel primitives used by the hot paths (coordinate projection,
// Moran sums, gradient-boosting residual updates). Each kernel has a scalar
// reference implementation and, on x86-64, an AVX2 variant selected at
// runtime. Elementwise kernels (axpy, scale_shift) produce bit-identical
// results across backends because no FMA contraction is used; reductions may
// differ in the last bits due to association order.
namespace looplens::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name();
bool avx2_supported();

// Testing hook. Throws std::invalid_argument when the backend is unavailable.
void force_backend(Backend b);
void reset_backend();

double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
// sum of (x[i] - mean)^2
double sum_sq_dev(const double* x, std::size_t n, double mean);
// sum of w[k] * y[idx[k]]
double gather_dot(const std::int32_t* idx, const double* w, std::size_t k, const double* y);
// out[i] = (x[i] - shift) * scale
void scale_shift(const double* x, std::size_t n, double shift, double scale, double* out);

// Reference implementations, always available, used for equivalence tests.
namespace scalar {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sum_sq_dev(const double* x, std::size_t n, double mean);
double gather_dot(const std::int32_t* idx, const double* w, std::size_t k, const double* y);
void scale_shift(const double* x, std::size_t n, double shift, double scale, double* out);
} // namespace scalar

} // namespace looplens::kernels
