#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dynstereo {

/// Counter-based generator built on the SplitMix64 finalizer. Every draw is
/// a pure function of (seed, stream, counter), so values never depend on
/// generation order and match bit-for-bit on any IEEE-754 platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ull))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  [[nodiscard]] std::uint64_t bits(std::uint64_t counter) const {
    return mix(key_ + counter * 0x9E3779B97F4A7C15ull);
  }

  /// Uniform in the open interval (0, 1).
  [[nodiscard]] double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  [[nodiscard]] double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  /// Standard normal via Box-Muller over counters 2c and 2c+1.
  [[nodiscard]] double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Derives an independent generator for a sub-stream.
  [[nodiscard]] CounterRng substream(std::uint64_t stream) const {
    CounterRng r(0);
    r.key_ = mix(key_ ^ mix(stream + 0xD1B54A32D192ED03ull));
    return r;
  }

 private:
  std::uint64_t key_;
};

}  // namespace dynstereo
