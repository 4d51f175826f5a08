#pragma once

// Deterministic random number generation. The simulator requires byte-exact
// reproducibility across reruns, so we avoid std::*_distribution (whose
// output is implementation-defined) and ship a fixed xoshiro256++ core with
// splitmix64 stream derivation. Streams are split counter-style: a (seed,
// path...) tuple always yields the same generator, so any single run of an
// experiment can be reproduced in isolation.

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace sbamp {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  /// Derive an independent generator for (seed, path...). Used to give each
  /// run / planner cycle / perturbation draw its own stream.
  static Rng stream(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t sm = seed;
    (void)splitmix64(sm);
    for (uint64_t p : path) {
      sm ^= 0x9e3779b97f4a7c15ULL + p;
      (void)splitmix64(sm);
    }
    return Rng(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n); n must be > 0. Modulo bias is negligible for
  /// the cell/index counts used here.
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller (consumes two uniforms per call).
  double normal() {
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t s_[4] = {};
};

}  // namespace sbamp
