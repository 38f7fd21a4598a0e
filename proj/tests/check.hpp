#pragma once

// Shared helpers for the unit tests: finite-difference gradient checks and
// small deterministic fixtures.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pafrob/rng.hpp"
#include "pafrob/tensor.hpp"

namespace testing {

using pafrob::Shape;
using pafrob::Tensor;

// |a - b| relative to max(|a|, |b|), with a floor so that near-zero
// derivatives are compared absolutely.
inline double rel_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  pafrob::Rng rng(seed);
  std::vector<double> v(pafrob::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Max relative error between autodiff and central differences of the scalar
// f over every entry of each leaf in `leaves`.
inline double gradient_error(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                             double h = 1e-4) {
  for (Tensor& t : leaves) t.zero_grad();
  f().backward();
  double worst = 0.0;
  for (Tensor& t : leaves) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto v = t.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = f().item();
      v[i] = keep - h;
      const double down = f().item();
      v[i] = keep;
      worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

}  // namespace testing
