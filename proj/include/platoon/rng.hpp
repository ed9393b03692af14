#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "platoon/core.hpp"

namespace platoon {

enum class Stream : std::uint64_t { process = 1, sensor_abs = 2, sensor_rel = 3, attack = 4 };

// Stateless counter-based generator. Every draw is a pure function of its key,
// so results do not depend on evaluation order or threading.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(long t, Index vehicle, Stream s, std::uint64_t draw) const {
    std::uint64_t h = mix(seed_ ^ 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ static_cast<std::uint64_t>(t));
    h = mix(h ^ (static_cast<std::uint64_t>(vehicle) << 8));
    h = mix(h ^ (static_cast<std::uint64_t>(s) << 40));
    return mix(h ^ (draw * 0xd1b54a32d192ed03ULL));
  }

  // Uniform on (0, 1): 53 random bits, offset by half an ulp so 0 is excluded.
  double uniform(long t, Index vehicle, Stream s, std::uint64_t draw) const {
    return (static_cast<double>(bits(t, vehicle, s, draw) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on draws (2k, 2k+1).
  double normal(long t, Index vehicle, Stream s, std::uint64_t k) const {
    const double u1 = uniform(t, vehicle, s, 2 * k);
    const double u2 = uniform(t, vehicle, s, 2 * k + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Both components uniform on (0, bound/sqrt(2)), so the norm never exceeds
  // bound.
  Vec2 bounded_noise(double bound, long t, Index vehicle, Stream s) const {
    if (bound <= 0.0) return Vec2::Zero();
    const double c = bound / std::numbers::sqrt2;
    return Vec2(c * uniform(t, vehicle, s, 0), c * uniform(t, vehicle, s, 1));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace platoon
