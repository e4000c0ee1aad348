// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bexdep {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for the stream identified by (seed, a, b, c). Parallel units
/// (replicates, projections) each get their own stream, so results do not
/// depend on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a = 0,
                                    std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  std::uint64_t s = mix64(seed ^ 0x243f6a8885a308d3ULL);
  s = mix64(s ^ a);
  s = mix64(s ^ b);
  s = mix64(s ^ c);
  return s;
}

// Stream tags, one per consumer of randomness.
inline constexpr std::uint64_t kSeedScenario = 0x5343454eULL;    // scenario data
inline constexpr std::uint64_t kSeedMethod = 0x4d455448ULL;      // per-replicate method seed
inline constexpr std::uint64_t kSeedProjection = 0x50524f4aULL;  // BERET projections

/// Deterministic random stream. mt19937_64 gives a portable bit sequence;
/// the uniform/normal mappings are pinned here because the std
/// distributions are implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// uniform on (0, 1]
  double uniform01() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  /// uniform on (lo, hi]
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// standard normal (Box-Muller, pairs cached)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace bexdep
