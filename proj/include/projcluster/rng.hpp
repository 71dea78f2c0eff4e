#pragma once

#include <cstdint>

namespace projcluster {

/// splitmix64 generator with portable draws, so seeded outputs are identical
/// on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Uniform real in [lo, hi).
  double uniform(double lo, double hi);
  bool bernoulli(double p);

 private:
  std::uint64_t state_;
};

/// Derives an independent seed for stream `index` of a base seed.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace projcluster
