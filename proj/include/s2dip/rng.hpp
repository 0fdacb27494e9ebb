#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "s2dip/error.hpp"

namespace s2dip {

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: draw number i is a pure function of (seed, i),
/// so streams are reproducible and can be split without shared state.
///
/// All derived distributions are implemented here rather than through
/// <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : seed_(seed), key_(detail::mix64(seed ^ kSeedSalt)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept {
    return detail::mix64(key_ + kGolden * ++counter_);
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw ValueError("uniform: require lo < hi");
    return lo + (hi - lo) * uniform01();
  }

  /// Standard normal via Box-Muller; the sine branch is kept for the next call.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return radius * std::cos(theta);
  }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValueError("below: empty range");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Integer uniform on the inclusive range [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw ValueError("integer: require lo <= hi");
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool coin() noexcept { return (next_u64() >> 63) != 0; }

  /// Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const noexcept {
    return Rng(detail::mix64(key_ ^ detail::mix64(stream + kGolden)));
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x5D2D1B6A3C4E8F01ULL;

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace s2dip
