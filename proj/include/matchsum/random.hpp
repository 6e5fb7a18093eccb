#pragma once

#include <cmath>
#include <cstdint>

namespace matchsum {

// Counter-friendly splitmix64 generator. Cheap to construct, so estimation
// loops can derive an independent stream per (seed, iteration) and stay
// deterministic regardless of scheduling.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n > 0. Rejection-free bias is negligible for
  // the index ranges used here, but keep it exact anyway.
  uint64_t next_below(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (no cached spare; keeps the stream layout
  // independent of call history).
  double normal() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  uint64_t state_;
};

// Mixes a base seed with a stream tag and counter into an independent seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream, uint64_t counter = 0) {
  Rng r(seed ^ (stream * 0x9e3779b97f4a7c15ull) ^ (counter * 0xd1342543de82ef95ull));
  return r.next_u64();
}

}  // namespace matchsum
