#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace foresttrav {

// Deterministic generator with explicit draw transforms. The standard
// distributions are implementation-defined, so uniform/normal/int draws are
// spelled out here to keep simulation logs and trained weights reproducible
// for a fixed seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    // SplitMix64 expansion of the seed into generator state.
    state_ = seed;
    s0_ = next_splitmix();
    s1_ = next_splitmix();
    if (s0_ == 0 && s1_ == 0) s1_ = 1;
  }

  // xoroshiro128+ core.
  uint64_t next_u64() {
    const uint64_t a = s0_;
    uint64_t b = s1_;
    const uint64_t result = a + b;
    b ^= a;
    s0_ = rotl(a, 24) ^ b ^ (b << 16);
    s1_ = rotl(b, 37);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one value per call, the sibling draw is discarded so the
  // draw count per sampled quantity stays fixed.
  double normal(double mean, double stddev) {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Independent child stream; used to decouple per-scan / per-epoch draws
  // from the order in which earlier draws happened.
  Rng fork(uint64_t stream_id) {
    return Rng(next_splitmix_of(state_ ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1))));
  }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t next_splitmix() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return next_splitmix_of(state_);
  }

  static uint64_t next_splitmix_of(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t state_ = 0;
  uint64_t s0_ = 0;
  uint64_t s1_ = 0;
};

}  // namespace foresttrav
