#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace phaselab {

/// One step of the SplitMix64 sequence: advances `state` and returns the
/// next output.  Used only to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Deterministic random stream.  Every draw is built from raw 64-bit outputs
/// of std::mt19937_64, whose sequence is fixed by the C++ standard, so runs
/// are bit-reproducible across platforms and compilers.  The distribution
/// transforms below are hand-rolled for the same reason: the std::*
/// distribution classes are not portable across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  /// Stream for the k-th member of an ensemble: seeded with the k-th output
  /// of the SplitMix64 sequence started at `master_seed`.
  static RandomStream for_index(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t s = master_seed + 0x9E3779B97F4A7C15ull * index;
    return RandomStream(splitmix64(s));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [a, b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Exponential with the given rate, by inversion.
  double exponential(double rate) {
    if (rate <= 0) throw std::invalid_argument("exponential: rate must be positive");
    return -std::log1p(-uniform()) / rate;
  }

  /// Exponential with density rate*exp(-rate*t) restricted to [0, t_max],
  /// by inversion of the truncated CDF.
  double truncated_exponential(double rate, double t_max) {
    if (rate <= 0 || t_max <= 0)
      throw std::invalid_argument("truncated_exponential: rate and t_max must be positive");
    double tail = -std::expm1(-rate * t_max);  // 1 - exp(-rate t_max)
    return -std::log1p(-uniform() * tail) / rate;
  }

  /// Poisson by sequential inversion.  Fine for the desk-scale means used
  /// here; refuses means large enough to underflow exp(-mean).
  int poisson(double mean) {
    if (mean < 0) throw std::invalid_argument("poisson: negative mean");
    if (mean > 700) throw std::invalid_argument("poisson: mean too large for inversion");
    double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    int k = 0;
    const int guard = static_cast<int>(10 * mean) + 100;
    while (u > cdf && k < guard) {
      ++k;
      p *= mean / k;
      cdf += p;
    }
    return k;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace phaselab
