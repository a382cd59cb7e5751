#pragma once

#include <cstdint>
#include <random>

namespace strudel {

/// Deterministic draws on top of mt19937_64. std::uniform_int_distribution is
/// implementation-defined, so seeded runs would not reproduce across standard
/// libraries; these helpers pin the exact bit stream consumed.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, n), n >= 1. Rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~0ull - (~0ull % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
  std::mt19937_64 engine_;
};

}  // namespace strudel
