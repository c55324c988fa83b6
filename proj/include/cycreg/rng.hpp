#pragma once

#include <cstdint>

namespace cycreg {

/// splitmix64. Pinned (rather than std::mt19937) so seeded phantom datasets
/// can be regenerated identically from any language.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// uniform in [0,1)
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// inclusive bounds
  int uniform_int(int lo, int hi) { return lo + int(next() % std::uint64_t(hi - lo + 1)); }
};

}  // namespace cycreg
