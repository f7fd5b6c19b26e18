#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace phaselab {

/// Trigonometric (Laurent) polynomial f(phi) = sum_{|k|<=d} c_k e^{i k phi}
/// on the unit circle.  Products are exact coefficient convolutions, so ring
/// integrals of detection-factor products reduce to reading off c_0.  All
/// arithmetic runs in extended precision to keep long products of nearly
/// cancelling factors accurate at the 1e-12 level.
class TrigPoly {
 public:
  using Coeff = std::complex<long double>;

  TrigPoly() : degree_(0), c_(1, Coeff(1)) {}

  static TrigPoly constant(double a) {
    TrigPoly p;
    p.c_[0] = Coeff(a);
    return p;
  }

  /// a0 + ac*cos(phi) + as*sin(phi)
  static TrigPoly harmonic_affine(double a0, double ac, double as) {
    TrigPoly p;
    p.degree_ = 1;
    p.c_.assign(3, Coeff(0));
    p.c_[0] = Coeff(ac / 2.0L, as / 2.0L);   // k = -1: (ac + i as)/2
    p.c_[1] = Coeff(a0);
    p.c_[2] = Coeff(ac / 2.0L, -as / 2.0L);  // k = +1: (ac - i as)/2
    return p;
  }

  int degree() const { return degree_; }

  /// Coefficient c_k (zero outside |k| <= degree).
  Coeff coeff(int k) const {
    if (k < -degree_ || k > degree_) return Coeff(0);
    return c_[static_cast<std::size_t>(k + degree_)];
  }

  /// Mean over the circle with measure d(phi)/(2*pi), i.e. Re c_0.
  double mean() const { return static_cast<double>(c_[static_cast<std::size_t>(degree_)].real()); }

  long double mean_ld() const { return c_[static_cast<std::size_t>(degree_)].real(); }

  /// Pointwise value (real part; imaginary parts cancel for real-valued f).
  double value(double phi) const {
    const Coeff z = std::polar(1.0L, static_cast<long double>(phi));
    Coeff zk(1);
    long double acc = c_[static_cast<std::size_t>(degree_)].real();
    for (int k = 1; k <= degree_; ++k) {
      zk *= z;
      // c_{-k} = conj(c_k) for real f; add both conjugate terms at once
      acc += 2.0L * (c_[static_cast<std::size_t>(degree_ + k)] * zk).real();
    }
    return static_cast<double>(acc);
  }

  TrigPoly& operator*=(const TrigPoly& rhs) {
    const int d = degree_ + rhs.degree_;
    std::vector<Coeff> out(static_cast<std::size_t>(2 * d + 1), Coeff(0));
    for (int i = -degree_; i <= degree_; ++i) {
      const Coeff ci = c_[static_cast<std::size_t>(i + degree_)];
      if (ci == Coeff(0)) continue;
      for (int j = -rhs.degree_; j <= rhs.degree_; ++j) {
        out[static_cast<std::size_t>(i + j + d)] += ci * rhs.c_[static_cast<std::size_t>(j + rhs.degree_)];
      }
    }
    degree_ = d;
    c_ = std::move(out);
    return *this;
  }

  friend TrigPoly operator*(TrigPoly a, const TrigPoly& b) {
    a *= b;
    return a;
  }

  TrigPoly pow(int k) const {
    if (k < 0) throw std::invalid_argument("TrigPoly::pow: negative exponent");
    TrigPoly out;
    for (int i = 0; i < k; ++i) out *= *this;
    return out;
  }

 private:
  int degree_;
  std::vector<Coeff> c_;  // c_[k + degree_] holds c_k
};

/// Product prod_i base[i]^exponent[i], applying one factor at a time and
/// interleaving the bases in proportion to their exponents.  Interleaving
/// keeps the partial products balanced, which matters when the bases nearly
/// cancel (e.g. cos^2 and sin^2 of the same half-angle).
inline TrigPoly interleaved_power_product(std::span<const TrigPoly> base,
                                          std::span<const int> exponent) {
  if (base.size() != exponent.size())
    throw std::invalid_argument("interleaved_power_product: size mismatch");
  std::vector<int> applied(base.size(), 0);
  TrigPoly out;
  for (;;) {
    // next factor: the one lagging most behind its target share
    int pick = -1;
    long double best = 2.0L;
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (applied[i] >= exponent[i]) continue;
      long double frac = static_cast<long double>(applied[i]) / exponent[i];
      if (frac < best) {
        best = frac;
        pick = static_cast<int>(i);
      }
    }
    if (pick < 0) break;
    out *= base[static_cast<std::size_t>(pick)];
    ++applied[static_cast<std::size_t>(pick)];
  }
  return out;
}

/// cos^{2n}(x/2) * sin^{2m}(x/2) as a trig polynomial of degree n+m.
inline TrigPoly half_angle_power(int n, int m) {
  if (n < 0 || m < 0) throw std::invalid_argument("half_angle_power: negative exponent");
  const TrigPoly bases[2] = {
      TrigPoly::harmonic_affine(0.5, 0.5, 0.0),   // cos^2(x/2)
      TrigPoly::harmonic_affine(0.5, -0.5, 0.0),  // sin^2(x/2)
  };
  const int exps[2] = {n, m};
  return interleaved_power_product(std::span<const TrigPoly>(bases, 2),
                                   std::span<const int>(exps, 2));
}

/// Exact mean of cos^{2n}(x/2) sin^{2m}(x/2) over the circle:
/// Gamma(n+1/2) Gamma(m+1/2) / (pi (n+m)!).
inline double half_angle_mean(int n, int m) {
  if (n < 0 || m < 0) throw std::invalid_argument("half_angle_mean: negative exponent");
  return std::exp(std::lgamma(n + 0.5) + std::lgamma(m + 0.5) - std::lgamma(n + m + 1.0)) /
         3.14159265358979323846;
}

}  // namespace phaselab
