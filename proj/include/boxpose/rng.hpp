#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace boxpose {

/// Seeded random source used throughout the library. All draws are built
/// directly on std::mt19937_64 output words, so a given seed reproduces the
/// same stream on every standard-conforming platform (the distribution
/// adapters in <random> are implementation-defined and are avoided here).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double canonical() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * canonical(); }

  /// Unbiased uniform integer in [0, n). n must be >= 1.
  int uniform_int(int n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t bound =
        std::numeric_limits<std::uint64_t>::max() / un * un;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= bound);
    return static_cast<int>(x % un);
  }

  /// Zero-mean Gaussian via Box-Muller (pairs cached).
  double gaussian(double sigma) {
    if (have_spare_) {
      have_spare_ = false;
      return spare_ * sigma;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = canonical();
    const double u2 = canonical();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta) * sigma;
  }

  /// Derives an independent per-item seed from a base seed: splitmix64
  /// finalizer applied to (seed XOR index). This is the documented frame-seed
  /// splitting rule used by the scene generator and pipeline.
  static std::uint64_t split(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = (seed ^ index) + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace boxpose
