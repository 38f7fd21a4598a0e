#pragma once

// Data-parallel inner loops used by the tensor, activation and attack code.
//
// Every kernel has a scalar reference implementation. Wider variants (AVX2 +
// FMA on x86-64) are compiled into separate translation units and selected at
// runtime by `active()`. Variants must agree with the scalar reference to
// within rounding; tests/simd_test.cpp checks every entry pairwise.

#include <cstddef>
#include <string_view>

namespace pafrob::simd {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  const char* name;

  // out[i] = a[i] op b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = s * a[i]
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  // y[i] += s * x[i]
  void (*axpy)(double s, const double* x, double* y, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);

  // Row-major products. Each overwrites c.
  //   gemm:      c[m x n] = a[m x k] * b[k x n]
  //   gemm_tn:   c[m x n] = a[k x m]^T * b[k x n]
  //   gemm_nt:   c[m x n] = a[m x k] * b[n x k]^T
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c);
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);

  // out = x <= 0 ? neg_slope * x : pos_slope * x
  void (*piecewise_linear)(const double* x, double neg_slope, double pos_slope,
                           double* out, std::size_t n);
  // out = x <= 0 ? neg_slope : pos_slope
  void (*piecewise_linear_slope)(const double* x, double neg_slope,
                                 double pos_slope, double* out, std::size_t n);

  // sign with sign(0) = 0
  void (*sign)(const double* x, double* out, std::size_t n);
  void (*clamp)(double* x, double lo, double hi, std::size_t n);
  // x[i] <- clamp(x[i], center[i] - radius, center[i] + radius)
  void (*project_box)(double* x, const double* center, double radius,
                      std::size_t n);

  double (*sum)(const double* x, std::size_t n);
  double (*sum_abs)(const double* x, std::size_t n);
  double (*sum_sq)(const double* x, std::size_t n);
  double (*max_abs)(const double* x, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();

// Kernel table used by the library. Chosen on first use: the widest variant
// the CPU supports, unless PAFROB_SIMD=scalar is set in the environment.
const KernelTable& active();

// Overrides the runtime choice. Throws std::runtime_error if the backend is
// unavailable on this machine.
void select(Backend backend);

bool cpu_supports_avx2();

std::string_view backend_name(Backend backend);

}  // namespace pafrob::simd
