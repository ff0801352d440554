#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

#include "p2pbench/common.hpp"

namespace p2pbench {

// Deterministic splitmix64 generator with named stream derivation.
// Identical (seed, stream tag, call sequence) gives identical output on
// every platform; no std::random machinery is used anywhere so results
// never depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : origin_(seed), state_(seed) {}

  Rng(std::uint64_t seed, std::string_view stream_tag)
      : Rng(derive(seed, stream_tag)) {}

  // Independent child stream; depends only on the parent's origin seed and
  // the tag, never on how far the parent has advanced.
  Rng stream(std::string_view tag) const { return Rng(origin_, tag); }
  Rng stream(std::uint64_t index) const {
    return Rng(mix(origin_ ^ (0x9e3779b97f4a7c15ULL + index)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive
    return lo + static_cast<std::int64_t>(
                    next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Box-Muller; consumes exactly two uniforms per call.
  double normal(double mu = 0.0, double sigma = 1.0) {
    const double u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return mu + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double lognormal(double mu, double sigma) {
    return std::exp(normal(mu, sigma));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Weighted choice over nonnegative weights summing to anything > 0.
  std::size_t choice(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = next_double() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.size() - 1;
  }

  std::uint64_t origin() const { return origin_; }

  static std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
    return mix(seed ^ fnv1a64(tag));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t origin_;
  std::uint64_t state_;
};

}  // namespace p2pbench
