#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace psmatch {

/// Deterministic random source. mt19937_64 is fully specified by the
/// standard; the distribution transforms below are spelled out here instead
/// of using std::*_distribution (whose output is implementation-defined),
/// so a seed reproduces the same stream everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Independent substream for (seed, stream), e.g. one per bootstrap replicate.
  static Rng derived(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix64(seed ^ mix64(stream)));
  }

  /// Uniform on (0,1), 53-bit resolution, endpoints excluded.
  double uniform01() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via inverse-CDF (rational approximation, |rel err| < 1.2e-9).
  double normal() { return inverse_normal_cdf(uniform01()); }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  int bernoulli(double p) { return uniform01() < p ? 1 : 0; }

  /// Unbiased integer in [0, n) by rejection.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    const std::uint64_t un = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % un);
  }

  /// Index drawn from the given probability vector (assumed to sum to 1).
  int categorical(std::span<const double> probs) {
    double u = uniform01();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  static double inverse_normal_cdf(double p);

 private:
  static std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
};

}  // namespace psmatch
