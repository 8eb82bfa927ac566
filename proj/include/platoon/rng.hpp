#pragma once

// Seeded random source. All draws are derived from raw mt19937_64 output so
// streams are bit-identical across standard libraries; substreams give
// independent deterministic streams for parallel sampling.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "platoon/numeric.hpp"

namespace platoon::num {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Independent stream derived from (seed, stream index).
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(seed ^ splitmix64(stream)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) {
    require(std::isfinite(a) && std::isfinite(b) && a <= b,
            "Rng::uniform: bad interval");
    return a + (b - a) * uniform();
  }

  double exponential(double rate) {
    require(rate > 0.0, "Rng::exponential: rate must be > 0");
    return -std::log1p(-uniform()) / rate;
  }

  // Exponential conditioned on [0, cap], by inverse CDF; one draw per sample.
  double truncated_exponential(double rate, double cap) {
    require(rate > 0.0 && cap > 0.0, "Rng::truncated_exponential: bad params");
    const double mass = -std::expm1(-rate * cap);  // P(X <= cap)
    return -std::log1p(-uniform() * mass) / rate;
  }

  // Unbiased integer in [0, n).
  std::size_t uniform_int(std::size_t n) {
    require(n > 0, "Rng::uniform_int: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
  }

  // Index draw from an (unnormalised is fine) nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights) {
    require(!weights.empty(), "Rng::categorical: empty weights");
    double total = 0.0;
    for (double w : weights) {
      require(std::isfinite(w) && w >= 0.0, "Rng::categorical: bad weight");
      total += w;
    }
    require(total > 0.0, "Rng::categorical: zero total weight");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace platoon::num
