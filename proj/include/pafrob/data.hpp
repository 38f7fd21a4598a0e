#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pafrob/tensor.hpp"

namespace pafrob::data {

struct Dataset {
  Tensor x;            // [N, ...] features
  std::vector<int> y;  // labels in [0, classes)
  std::size_t classes = 2;
  double lo = 0.0;  // feature range; attacks clip to it
  double hi = 1.0;
  std::string name;
  std::uint64_t seed = 0;
  std::optional<double> margin;  // L-infinity gap between classes, when known

  std::size_t size() const { return y.size(); }
  Shape sample_shape() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t n) const;
};

// Two interleaved half circles, class 0 the upper arc, mapped into [0,1]^2 by
// (x + 1.5) / 4. `noise` is the Gaussian std-dev in the unscaled moon units.
// Points are clamped to [0,1].
Dataset two_moons(std::size_t n, double noise, std::uint64_t seed);

// L-infinity distance between the two noise-free arcs after scaling.
double two_moons_margin();

// Balanced 2-D blobs. Draws are Gaussian with std-dev sigma truncated to a
// disk of radius 3 sigma and to [0,1]^2, so classes never come closer than
// (min center distance - 6 sigma); that bound is recorded as the margin.
Dataset gaussian_blobs(std::size_t n, const std::vector<std::array<double, 2>>& centers,
                       double sigma, std::uint64_t seed);

// IDX (MNIST) files. Errors are distinct types so callers can report them.
class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IdxMagicError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxTruncatedError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxCountMismatchError : public IdxError {
 public:
  using IdxError::IdxError;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Images become [N, 1, rows, cols] with pixels scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

// Header "f0,...,f{d-1},label"; one row per sample, features flattened.
void write_csv(std::ostream& os, const Dataset& ds);

}  // namespace pafrob::data
