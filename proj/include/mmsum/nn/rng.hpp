#pragma once

#include <cstdint>

namespace mmsum::nn {

// Deterministic pseudo-random source. Every random draw in the project
// flows from an explicit 64-bit seed through this generator, so runs are
// bit-reproducible regardless of the standard library in use.
//
// Core generator is splitmix64; normal deviates use Box-Muller without a
// cached spare (two uniforms per call, fixed consumption order).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double stddev = 1.0);

  // in [0, n); n > 0
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Independent stream derived from this seed and a stream id. Does not
  // advance this generator.
  Rng fork(std::uint64_t stream) const {
    Rng r(state_ ^ (0x632be59bd9b4e019ull * (stream + 1)));
    r.next_u64();
    return r;
  }

 private:
  std::uint64_t state_;
};

}  // namespace mmsum::nn
