#pragma once

#include <cmath>

namespace pafrob {

// Logistic sigmoid, branching on sign so exp never overflows.
inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) {
  if (z > 30.0) return z + std::exp(-z);
  if (z < -30.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

}  // namespace pafrob
