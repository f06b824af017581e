#pragma once

#include <cstdint>

namespace paramprune {

// splitmix64; deterministic across platforms, cheap enough for everything here.
struct SplitMix {
  uint64_t state;
  explicit SplitMix(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  SplitMix s(a ^ (0x9e3779b97f4a7c15ull * (b + 0x632be59bd9b4e019ull)));
  s.next();
  return s.next();
}

}  // namespace paramprune
