#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace phaselab {

/// log(n!) via lgamma; exact enough for n up to a few thousand.
inline double log_factorial(int n) {
  if (n < 0) throw std::invalid_argument("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

/// log of the binomial coefficient C(n, k).
inline double log_binomial(int n, int k) {
  if (k < 0 || k > n) throw std::invalid_argument("log_binomial: k out of range");
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// Exact binomial coefficient; valid while the result fits in 64 bits
/// (n <= 61 covers every use in this library).
inline std::uint64_t binomial_u64(int n, int k) {
  if (k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    // multiply first, divide by i afterwards: the running value is always
    // a binomial coefficient, so the division is exact
    r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  }
  return r;
}

/// Poisson pmf exp(-mean) mean^k / k!, evaluated in log space for stability.
inline double poisson_pmf(int k, double mean) {
  if (k < 0 || mean < 0) throw std::invalid_argument("poisson_pmf: bad arguments");
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(mean) - mean - log_factorial(k));
}

/// Compensated (Kahan) accumulator for long sums of small terms.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace phaselab
