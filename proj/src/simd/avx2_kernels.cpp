// AVX2 + FMA variants. Compiled with -mavx2 -mfma; only reached through the
// dispatcher after a CPUID check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "pafrob/simd/kernels.hpp"

namespace pafrob::simd {
namespace {

constexpr std::size_t kWidth = 4;

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

inline __m256d vabs(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vs, _mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = s * a[i];
}

void axpy(double s, const double* x, double* y, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(vs, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < n; ++i) y[i] += s * x[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kWidth <= n; i += 2 * kWidth) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + kWidth),
                           _mm256_loadu_pd(b + i + kWidth), acc1);
  }
  for (; i + kWidth <= n; i += kWidth)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
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
  const __m256d vneg = _mm256_set1_pd(neg_slope);
  const __m256d vpos = _mm256_set1_pd(pos_slope);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d le = _mm256_cmp_pd(vx, zero, _CMP_LE_OQ);
    __m256d r = _mm256_blendv_pd(_mm256_mul_pd(vpos, vx), _mm256_mul_pd(vneg, vx), le);
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i) out[i] = x[i] <= 0.0 ? neg_slope * x[i] : pos_slope * x[i];
}

void piecewise_linear_slope(const double* x, double neg_slope, double pos_slope,
                            double* out, std::size_t n) {
  const __m256d vneg = _mm256_set1_pd(neg_slope);
  const __m256d vpos = _mm256_set1_pd(pos_slope);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    __m256d le = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_LE_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(vpos, vneg, le));
  }
  for (; i < n; ++i) out[i] = x[i] <= 0.0 ? neg_slope : pos_slope;
}

void sign(const double* x, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d pos = _mm256_and_pd(_mm256_cmp_pd(vx, zero, _CMP_GT_OQ), one);
    __m256d neg = _mm256_and_pd(_mm256_cmp_pd(vx, zero, _CMP_LT_OQ), one);
    _mm256_storeu_pd(out + i, _mm256_sub_pd(pos, neg));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
}

void clamp(double* x, double lo, double hi, std::size_t n) {
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vhi = _mm256_set1_pd(hi);
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth)
    _mm256_storeu_pd(x + i, _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(x + i), vlo), vhi));
  for (; i < n; ++i) x[i] = std::min(std::max(x[i], lo), hi);
}

void project_box(double* x, const double* center, double radius, std::size_t n) {
  const __m256d vr = _mm256_set1_pd(radius);
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    __m256d c = _mm256_loadu_pd(center + i);
    __m256d v = _mm256_max_pd(_mm256_loadu_pd(x + i), _mm256_sub_pd(c, vr));
    _mm256_storeu_pd(x + i, _mm256_min_pd(v, _mm256_add_pd(c, vr)));
  }
  for (; i < n; ++i)
    x[i] = std::min(std::max(x[i], center[i] - radius), center[i] + radius);
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_abs(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) acc = _mm256_add_pd(acc, vabs(_mm256_loadu_pd(x + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += std::abs(x[i]);
  return s;
}

double sum_sq(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) {
    __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

double max_abs(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kWidth <= n; i += kWidth) acc = _mm256_max_pd(acc, vabs(_mm256_loadu_pd(x + i)));
  alignas(32) double lanes[kWidth];
  _mm256_store_pd(lanes, acc);
  double m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  for (; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

constexpr KernelTable kAvx2{
    Backend::Avx2, "avx2", add, sub, mul, scale, axpy, dot, gemm, gemm_tn,
    gemm_nt, piecewise_linear, piecewise_linear_slope, sign, clamp,
    project_box, sum, sum_abs, sum_sq, max_abs};

}  // namespace

namespace detail {
const KernelTable& avx2_table() { return kAvx2; }
}  // namespace detail

}  // namespace pafrob::simd
