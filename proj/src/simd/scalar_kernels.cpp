#include "pafrob/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace pafrob::simd {
namespace {

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s * a[i];
}

void axpy(double s, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + p * n, crow, n);
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) axpy(arow[i], brow, c + i * n, n);
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot(a + i * k, b + j * k, k);
}

void piecewise_linear(const double* x, double neg_slope, double pos_slope,
                      double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i] <= 0.0 ? neg_slope * x[i] : pos_slope * x[i];
}

void piecewise_linear_slope(const double* x, double neg_slope, double pos_slope,
                            double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] <= 0.0 ? neg_slope : pos_slope;
}

void sign(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
}

void clamp(double* x, double lo, double hi, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::min(std::max(x[i], lo), hi);
}

void project_box(double* x, const double* center, double radius, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    x[i] = std::min(std::max(x[i], center[i] - radius), center[i] + radius);
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sum_abs(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(x[i]);
  return acc;
}

double sum_sq(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

constexpr KernelTable kScalar{
    Backend::Scalar, "scalar", add, sub, mul, scale, axpy, dot, gemm, gemm_tn,
    gemm_nt, piecewise_linear, piecewise_linear_slope, sign, clamp,
    project_box, sum, sum_abs, sum_sq, max_abs};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace pafrob::simd
