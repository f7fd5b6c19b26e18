#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace phaselab {

/// Gauss-Legendre rule on [-1, 1]: exact for polynomials of degree 2n-1.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline GaussLegendre compute_gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  GaussLegendre rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double eps = 1e-15;
  const int mid = (n + 1) / 2;
  for (int i = 0; i < mid; ++i) {
    // cosine initial guess for the i-th root, then Newton on P_n
    double z = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < eps) break;
    }
    rule.nodes[static_cast<std::size_t>(i)] = -z;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

}  // namespace detail

/// Cached Gauss-Legendre rule of order n (thread-safe).
inline const GaussLegendre& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussLegendre> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// Product scheme for integrals over the unit sphere with measure dOmega:
/// Gauss-Legendre in cos(theta) times a periodic trapezoid in phi.  Exact
/// for spherical polynomials of degree < min(2*n_theta, n_phi).
template <typename F>
double integrate_sphere(F&& f, int n_theta, int n_phi) {
  const GaussLegendre& gl = gauss_legendre(n_theta);
  const double dphi = 2.0 * 3.14159265358979323846 / n_phi;
  double total = 0.0;
  for (int i = 0; i < n_theta; ++i) {
    const double theta = std::acos(gl.nodes[static_cast<std::size_t>(i)]);
    double row = 0.0;
    for (int j = 0; j < n_phi; ++j) row += f(theta, j * dphi);
    total += gl.weights[static_cast<std::size_t>(i)] * row * dphi;
  }
  return total;
}

/// Mean over the circle with measure d(phi)/(2*pi), by periodic trapezoid.
template <typename F>
double ring_mean(F&& f, int n_phi) {
  double total = 0.0;
  const double dphi = 2.0 * 3.14159265358979323846 / n_phi;
  for (int j = 0; j < n_phi; ++j) total += f(j * dphi);
  return total / n_phi;
}

}  // namespace phaselab
