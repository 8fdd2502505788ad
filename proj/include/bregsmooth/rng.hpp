#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace bregsmooth {

// Counter-based generator: the output stream is a pure function of
// (seed, stream, draw index), so replicate r of a simulation can be
// regenerated in isolation and results do not depend on evaluation order
// or platform.  The mixer is SplitMix64 (Steele, Lea, Flood 2014); each
// call advances the counter by the 64-bit golden ratio and hashes it.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(mix(seed + kGamma) ^ mix(stream * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // uniform on [0,1) with 53 random bits
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform on (0,1], safe as a log() argument
  double uniform01_open0() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller, cosine branch only: every call consumes exactly two draws,
  // which keeps the counter advance independent of call history.
  double normal() {
    double u1 = uniform01_open0();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  int bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("bernoulli: p outside [0,1]");
    return uniform01() < p ? 1 : 0;
  }

  // Multiplicative (Knuth) sampler.  For large means the variate is split
  // as a sum of independent Poissons so exp(-lambda) never underflows;
  // additivity keeps the distribution exact.
  int poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::domain_error("poisson: bad mean");
    double remaining = lambda;
    long total = 0;
    while (remaining > 500.0) {
      total += poisson_knuth(500.0);
      remaining -= 500.0;
    }
    total += poisson_knuth(remaining);
    return static_cast<int>(total);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  long poisson_knuth(double lambda) {
    const double limit = std::exp(-lambda);
    long k = 0;
    double prod = uniform01_open0();
    while (prod > limit) {
      ++k;
      prod *= uniform01_open0();
    }
    return k;
  }

  std::uint64_t state_;
};

}  // namespace bregsmooth
