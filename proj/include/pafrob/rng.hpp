#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pafrob {

// Deterministic random stream. Draws are built from raw mt19937_64 output so
// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via Box-Muller; caches the second draw.
  double normal();

  // +1 or -1 with equal probability.
  double random_sign() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Named sub-stream of a root seed ("init", "data", "attack", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// Per-sample attack stream: root seed xor sample index, then mixed.
std::uint64_t sample_seed(std::uint64_t root, std::uint64_t index,
                          std::uint64_t restart = 0);

}  // namespace pafrob
