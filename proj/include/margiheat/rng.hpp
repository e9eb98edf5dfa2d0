#pragma once

#include <cmath>
#include <cstdint>

namespace margiheat {

// Deterministic, portable RNG. Standard-library engines are portable but the
// distributions are not, and bit-reproducible runs are a hard requirement
// here, so the distributions are spelled out explicitly.
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // splitmix64
  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller (cosine branch only)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
  uint64_t state_;
};

// Derives an independent stream seed from (seed, tag, index). Used so that
// every consumer (batch sampling, init, augmentation, ...) owns its own
// stream and resuming a run never depends on global RNG state.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag, uint64_t index) {
  uint64_t z = seed;
  z ^= tag * 0x9e3779b97f4a7c15ull + (z << 6) + (z >> 2);
  z ^= index * 0xc2b2ae3d27d4eb4full + (z << 6) + (z >> 2);
  // one splitmix round to decorrelate nearby indices
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stream tags, kept in one place to avoid collisions.
namespace rng_tag {
constexpr uint64_t kInit = 1;       // parameter initialization
constexpr uint64_t kBatch = 2;      // batch index sampling
constexpr uint64_t kExample = 3;    // synthetic example generation
constexpr uint64_t kAugment = 4;    // augmentation parameters
}  // namespace rng_tag

}  // namespace margiheat
