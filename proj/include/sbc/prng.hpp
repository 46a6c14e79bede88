#pragma once

// Deterministic random number generation used everywhere in this project.
//
// The generator is PCG-XSH-RR 64/32 ("pcg32"): 64-bit LCG state, 32-bit
// output via xorshift-high + random rotation. It is small, fast, and easy
// to reproduce in any language. The exact update rule, the bounded-integer
// rejection scheme, the double conversion, and the Box-Muller normal are
// all pinned here (and in the README) so that independent implementations
// produce bit-identical streams.

#include <cmath>
#include <cstdint>

namespace sbc {

// splitmix64 finalizer. Used for seed derivation only, never as a stream.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// derive_seed(base, k) gives the k-th child seed of `base`.
// Definition: splitmix64(base + 0x9E3779B97F4A7C15 * (k + 1)).
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  return splitmix64(base + 0x9E3779B97F4A7C15ull * (index + 1));
}

// Fixed stream selectors, one per consumer, so that two components seeded
// with the same user seed still draw independent sequences.
namespace streams {
constexpr uint64_t kSubset = 1;      // demo_model::subset
constexpr uint64_t kProjection = 2;  // random-projection encoder weights
constexpr uint64_t kWorld = 3;       // grid world generation
constexpr uint64_t kExpert = 4;      // expert policy noise
constexpr uint64_t kBaseline = 5;    // random baseline policy
constexpr uint64_t kPca = 6;         // power-iteration start vectors
}  // namespace streams

class Pcg32 {
 public:
  // Canonical pcg32 seeding: state = 0, inc = (seq << 1) | 1, step,
  // state += seed, step.
  Pcg32(uint64_t seed, uint64_t seq) : state_(0), inc_((seq << 1u) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  // High word drawn first.
  uint64_t next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform in [0, 1) with 53 random bits: (next_u64() >> 11) * 2^-53.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, bound) by rejection.
  uint32_t uniform_below(uint32_t bound) {
    uint32_t threshold = (-bound) % bound;
    for (;;) {
      uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller. Draws two doubles per pair; the cosine
  // variate is returned first, the sine variate on the following call.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    double u2 = next_double();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  uint64_t state_;
  uint64_t inc_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sbc
