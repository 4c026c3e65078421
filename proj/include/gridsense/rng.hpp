#pragma once

#include <cmath>
#include <cstdint>

namespace gridsense {

// Seeded PRNG (xoshiro256++ with splitmix64 seeding). All Monte-Carlo draws
// in the project go through this class so results are identical across
// platforms and standard-library versions. Substreams derived from
// (seed, index) keep trials independent and order-free.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  static Rng substream(uint64_t seed, uint64_t index) {
    uint64_t x = seed;
    uint64_t a = splitmix64(x);
    x = a ^ (index * 0x9E3779B97F4A7C15ull + 0x243F6A8885A308D3ull);
    return Rng(splitmix64(x));
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double gaussian(double mean, double sigma) {
    // Box-Muller; both uniforms drawn every call so the stream advance is
    // independent of how results are consumed.
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * radius * std::cos(6.283185307179586476925286766559 * u2);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t state_[4];
};

enum class NoiseModel { None, Uniform, Gaussian };

// Measurement-noise description. level_hz is the half-width b of a uniform
// +-b draw, or the standard deviation of a gaussian draw.
struct NoiseSpec {
  NoiseModel model = NoiseModel::None;
  double level_hz = 0.0;

  double sample_hz(Rng& rng) const {
    switch (model) {
      case NoiseModel::Uniform: return rng.uniform(-level_hz, level_hz);
      case NoiseModel::Gaussian: return rng.gaussian(0.0, level_hz);
      default: return 0.0;
    }
  }

  double variance_hz2() const {
    switch (model) {
      case NoiseModel::Uniform: return level_hz * level_hz / 3.0;
      case NoiseModel::Gaussian: return level_hz * level_hz;
      default: return 0.0;
    }
  }
};

}  // namespace gridsense
