#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace qising {

// Keyed random streams. Every consumer of randomness gets its own stream,
// constructed from the root seed plus up to three integer keys (site index,
// event index, replica index, ...). Two streams with different keys are
// independent for all practical purposes, and a run is reproducible bit for
// bit from the root seed alone, regardless of thread scheduling, because no
// stream state is ever shared between tasks.
//
// State mixing is splitmix64, the generator is xoshiro256++. Distributions
// are explicit inversions/rejections rather than std::<dist> wrappers, which
// keeps the byte stream identical across standard libraries.

inline uint64_t splitmix64_next(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  using result_type = uint64_t;

  explicit RngStream(uint64_t root_seed, uint64_t k1 = 0, uint64_t k2 = 0,
                     uint64_t k3 = 0) {
    uint64_t x = root_seed;
    (void)splitmix64_next(x);
    x ^= 0xd1b54a32d192ed03ull * (k1 + 1);
    (void)splitmix64_next(x);
    x ^= 0xaef17502108ef2d9ull * (k2 + 1);
    (void)splitmix64_next(x);
    x ^= 0x94d049bb133111ebull * (k3 + 1);
    for (int i = 0; i < 4; ++i) s_[i] = splitmix64_next(x);
    // xoshiro must not start from the all-zero state; splitmix output makes
    // that event essentially impossible, but guard anyway
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  static constexpr uint64_t min() { return 0; }
  static constexpr uint64_t max() { return ~0ull; }

  uint64_t operator()() { return next(); }

  uint64_t next() {
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

  // uniform on [0,1), 53-bit resolution
  double uniform() { return (next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double rate) {
    if (!(rate > 0)) throw std::invalid_argument("exponential: rate must be > 0");
    return -std::log1p(-uniform()) / rate;
  }

  // exact draw; product method, halving recursion keeps the product method in
  // its comfortable range for large means
  long poisson(double mean) {
    if (mean < 0 || !std::isfinite(mean))
      throw std::invalid_argument("poisson: bad mean");
    if (mean == 0) return 0;
    long n = 0;
    while (mean > 30.0) {
      mean *= 0.5;
      n += poisson_small(mean);
    }
    return n + poisson_small(mean);
  }

  double normal() {
    // Box-Muller, one value per pair of uniforms
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  long poisson_small(double mean) {
    const double limit = std::exp(-mean);
    long n = 0;
    double prod = uniform();
    while (prod > limit) {
      ++n;
      prod *= uniform();
    }
    return n;
  }

  uint64_t s_[4];
};

}  // namespace qising
