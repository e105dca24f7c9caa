#pragma once

#include <array>
#include <cstdint>

namespace lyanet {

/// Portable 64-bit PRNG: xoshiro256** seeded through splitmix64.
///
/// Every random draw in the library goes through this type so that a seed
/// produces the same stream on every platform and standard library. Uniform
/// doubles use the top 53 bits; normals use the Box-Muller transform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for worker `index`, seeded with `seed ^ index`.
  static Rng stream(std::uint64_t seed, std::uint64_t index) { return Rng(seed ^ index); }

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer on [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal.
  double normal();

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lyanet
