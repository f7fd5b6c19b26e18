#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "phaselab/errors.hpp"
#include "phaselab/geometry.hpp"
#include "phaselab/quadrature.hpp"
#include "phaselab/trigpoly.hpp"

namespace phaselab {

/// Reference measure the conditional phase density lives on.
///  - uniform_sphere: dOmega over the whole Bloch sphere (total 4*pi);
///  - ring: normalized uniform measure on the circle theta = theta0;
///  - point: unit mass at (theta0, phi0), i.e. a known phase.
struct BaseMeasure {
  enum class Kind { uniform_sphere, ring, point };

  Kind kind = Kind::uniform_sphere;
  double theta0 = 0.5 * kPi;
  double phi0 = 0.0;

  static BaseMeasure uniform_sphere() { return {Kind::uniform_sphere, 0.0, 0.0}; }
  static BaseMeasure ring(double theta0) {
    if (!(theta0 >= 0.0 && theta0 <= kPi))
      throw std::invalid_argument("BaseMeasure::ring: theta0 outside [0, pi]");
    return {Kind::ring, theta0, 0.0};
  }
  static BaseMeasure point(double theta0, double phi0) {
    SphericalDirection d(theta0, phi0);
    return {Kind::point, d.theta, d.phi};
  }
};

/// One recorded detection: multiplies the density by ((1 + u . direction)/2)^exponent.
struct DetectionFactor {
  UnitVector3 direction;
  int exponent = 1;
};

/// Conditional Bloch-sphere distribution of a decaying two-mode state after a
/// sequence of detections.  The density is stored exactly, as the base
/// measure times a product of detection factors; each factor also carries a
/// scalar prefactor 2*w_s per detection, accumulated in log space, so that
/// history weights can be read off without renormalizing intermediate states.
class PhaseDistribution {
 public:
  explicit PhaseDistribution(BaseMeasure base) : base_(base) {}

  const BaseMeasure& base() const { return base_; }
  const std::vector<DetectionFactor>& factors() const { return factors_; }
  double log_prefactor() const { return log_prefactor_; }

  /// Total detection count recorded in the factors.
  int detection_count() const {
    int n = 0;
    for (const auto& f : factors_) n += f.exponent;
    return n;
  }

  /// Density at a point, relative to the base measure (so a factor-free
  /// distribution has density 1 everywhere).  Excludes the scalar prefactor.
  double density(const SphericalDirection& d) const { return density_at(direction_to_vector(d)); }

  double density_at(const UnitVector3& u) const {
    double f = 1.0;
    for (const auto& fac : factors_)
      f *= std::pow(0.5 * (1.0 + u.dot(fac.direction)), fac.exponent);
    return f;
  }

  /// Distribution after `count` detections in the given channel: appends the
  /// channel direction as a detection factor (merging with an existing equal
  /// direction) and adds count*log(2 w) to the prefactor.  Signals
  /// AnnihilatedDistribution when the factor kills a point base exactly.
  PhaseDistribution after_detection(const DetectorChannel& ch, int count = 1) const {
    if (count < 0) throw std::invalid_argument("after_detection: negative count");
    if (!(ch.weight > 0.0)) throw std::invalid_argument("after_detection: channel weight must be positive");
    PhaseDistribution out = *this;
    if (count == 0) return out;
    if (base_.kind == BaseMeasure::Kind::point) {
      const UnitVector3 u = direction_to_vector(SphericalDirection(base_.theta0, base_.phi0));
      if (0.5 * (1.0 + u.dot(ch.direction)) <= 0.0) throw AnnihilatedDistribution();
    }
    out.log_prefactor_ += count * std::log(2.0 * ch.weight);
    for (auto& f : out.factors_) {
      if (f.direction == ch.direction) {
        f.exponent += count;
        return out;
      }
    }
    out.factors_.push_back(DetectionFactor{ch.direction, count});
    return out;
  }

  /// Integral of the density over the base measure (prefactor excluded).
  /// Exact ring-integral algebra for ring bases; Gauss-Legendre x trapezoid
  /// for the full sphere; point evaluation for point bases.
  double normalization() const {
    switch (base_.kind) {
      case BaseMeasure::Kind::ring: {
        const double s = std::sin(base_.theta0);
        if (s == 0.0) return pole_value();
        const double n = ring_poly().mean();
        if (!(n > 0.0)) throw AnnihilatedDistribution();
        return n;
      }
      case BaseMeasure::Kind::uniform_sphere: {
        const int k = detection_count();
        const int n_theta = std::max(64, k / 2 + 2);
        const int n_phi = std::max(256, 2 * k + 8);
        const double n =
            integrate_sphere([this](double th, double ph) { return density(SphericalDirection(th, ph)); },
                             n_theta, n_phi);
        if (!(n > 0.0)) throw AnnihilatedDistribution();
        return n;
      }
      case BaseMeasure::Kind::point: {
        const double n = density(SphericalDirection(base_.theta0, base_.phi0));
        if (!(n > 0.0)) throw AnnihilatedDistribution();
        return n;
      }
    }
    throw Error("normalization: unknown base kind");
  }

  /// Azimuthal marginal on a uniform grid phi_j = 2 pi j / grid, normalized
  /// so that (2 pi / grid) * sum == 1.
  std::vector<double> phase_marginal(int grid) const {
    if (grid < 8) throw std::invalid_argument("phase_marginal: grid must be >= 8");
    std::vector<double> m(static_cast<std::size_t>(grid), 0.0);
    const double dphi = kTwoPi / grid;
    if (phase_is_degenerate()) {
      // phase undefined at a pole: report the flat marginal
      std::fill(m.begin(), m.end(), 1.0 / kTwoPi);
      return m;
    }
    if (base_.kind == BaseMeasure::Kind::point) {
      const auto j = static_cast<std::size_t>(std::lround(base_.phi0 / dphi)) % m.size();
      m[j] = 1.0 / dphi;
      return m;
    }
    for (int j = 0; j < grid; ++j) m[static_cast<std::size_t>(j)] = marginal_density(j * dphi);
    double sum = 0.0;
    for (double v : m) sum += v * dphi;
    if (!(sum > 0.0)) throw AnnihilatedDistribution();
    for (double& v : m) v /= sum;
    return m;
  }

  /// Unnormalized azimuthal marginal density at one phi (ring value, or the
  /// cos(theta) integral for the full-sphere base).
  double marginal_density(double phi) const {
    switch (base_.kind) {
      case BaseMeasure::Kind::ring: {
        const double u_z = std::cos(base_.theta0);
        const double s = std::sin(base_.theta0);
        double f = 1.0;
        const double c = std::cos(phi), sn = std::sin(phi);
        for (const auto& fac : factors_) {
          const double u_dot = s * (c * fac.direction.x + sn * fac.direction.y) + u_z * fac.direction.z;
          f *= std::pow(0.5 * (1.0 + u_dot), fac.exponent);
        }
        return f;
      }
      case BaseMeasure::Kind::uniform_sphere: {
        const int k = detection_count();
        const GaussLegendre& gl = gauss_legendre(std::max(64, k / 2 + 2));
        double acc = 0.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i)
          acc += gl.weights[i] * density(SphericalDirection(std::acos(gl.nodes[i]), phi));
        return acc;
      }
      case BaseMeasure::Kind::point:
        throw Error("marginal_density: not defined for a point base");
    }
    throw Error("marginal_density: unknown base kind");
  }

  /// True when the distribution carries no azimuthal information (all mass
  /// at a pole).
  bool phase_is_degenerate() const {
    return (base_.kind == BaseMeasure::Kind::ring || base_.kind == BaseMeasure::Kind::point) &&
           std::sin(base_.theta0) == 0.0;
  }

 private:
  double pole_value() const {
    return density(SphericalDirection(base_.theta0, 0.0));
  }

  TrigPoly ring_poly() const {
    const double cz = std::cos(base_.theta0);
    const double s = std::sin(base_.theta0);
    std::vector<TrigPoly> bases;
    std::vector<int> exps;
    bases.reserve(factors_.size());
    exps.reserve(factors_.size());
    for (const auto& f : factors_) {
      bases.push_back(TrigPoly::harmonic_affine(0.5 * (1.0 + f.direction.z * cz),
                                                0.5 * f.direction.x * s, 0.5 * f.direction.y * s));
      exps.push_back(f.exponent);
    }
    return interleaved_power_product(bases, exps);
  }

  BaseMeasure base_;
  std::vector<DetectionFactor> factors_;
  double log_prefactor_ = 0.0;
};

/// Probability that the next detection fires each of the given channels,
/// conditioned on the current distribution (normalized over the channels).
inline std::vector<double> branching_probabilities(const PhaseDistribution& dist,
                                                   std::span<const DetectorChannel> channels) {
  if (channels.empty()) throw std::invalid_argument("branching_probabilities: no channels");
  std::vector<double> p(channels.size(), 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < channels.size(); ++s) {
    double raw = 0.0;
    try {
      const PhaseDistribution d = dist.after_detection(channels[s]);
      raw = 2.0 * channels[s].weight * d.normalization();
    } catch (const AnnihilatedDistribution&) {
      raw = 0.0;  // this channel is impossible from the current state
    }
    p[s] = raw;
    total += raw;
  }
  if (!(total > 0.0)) throw AnnihilatedDistribution();
  for (double& v : p) v /= total;
  return p;
}

/// Local maxima of the azimuthal marginal.
struct PhasePeak {
  double phi = 0.0;
  double height = 0.0;
};

struct PeakSet {
  std::vector<PhasePeak> peaks;
  bool flat = false;
};

namespace detail {

/// Golden-section maximization of f on [a, b] to the given phi tolerance.
template <typename F>
double golden_max(F&& f, double a, double b, double tol) {
  const double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Peaks of the normalized azimuthal marginal, each refined to ~1e-8 rad.
/// A flat marginal (uniform phase) yields no peaks and sets `flat`.
inline PeakSet peak_locations(const PhaseDistribution& dist, int grid = 1024) {
  PeakSet out;
  if (dist.phase_is_degenerate()) {
    out.flat = true;
    return out;
  }
  if (dist.base().kind == BaseMeasure::Kind::point) {
    out.peaks.push_back({dist.base().phi0, std::numeric_limits<double>::infinity()});
    return out;
  }
  const double norm = dist.normalization() * kTwoPi *
                      (dist.base().kind == BaseMeasure::Kind::uniform_sphere ? 1.0 / kTwoPi : 1.0);
  // `norm` scales marginal_density to the density integrating to 1 over phi
  const auto density = [&](double phi) { return dist.marginal_density(phi) / norm; };
  const double dphi = kTwoPi / grid;
  std::vector<double> m(static_cast<std::size_t>(grid), 0.0);
  for (int j = 0; j < grid; ++j) m[static_cast<std::size_t>(j)] = density(j * dphi);
  const double hi = *std::max_element(m.begin(), m.end());
  const double lo = *std::min_element(m.begin(), m.end());
  if (hi - lo <= 1e-10 * std::max(hi, 1e-300)) {
    out.flat = true;
    return out;
  }
  for (int j = 0; j < grid; ++j) {
    const double prev = m[static_cast<std::size_t>((j + grid - 1) % grid)];
    const double next = m[static_cast<std::size_t>((j + 1) % grid)];
    const double cur = m[static_cast<std::size_t>(j)];
    if (cur > prev && cur >= next) {
      const double phi = detail::golden_max(density, (j - 1) * dphi, (j + 1) * dphi, 1e-8);
      const double w = wrap_angle(phi);
      out.peaks.push_back({w, density(w)});
    }
  }
  // drop numerically negligible side maxima, merge near-duplicates, sort
  const double floor_h = 1e-9 * hi;
  std::erase_if(out.peaks, [&](const PhasePeak& p) { return p.height < floor_h; });
  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const PhasePeak& a, const PhasePeak& b) { return a.phi < b.phi; });
  std::vector<PhasePeak> merged;
  for (const auto& p : out.peaks) {
    if (!merged.empty() && p.phi - merged.back().phi < 1e-6) {
      if (p.height > merged.back().height) merged.back() = p;
      continue;
    }
    merged.push_back(p);
  }
  if (merged.size() >= 2 && kTwoPi - merged.back().phi + merged.front().phi < 1e-6) {
    if (merged.back().height > merged.front().height) merged.front() = merged.back();
    merged.pop_back();
  }
  out.peaks = std::move(merged);
  return out;
}

}  // namespace phaselab
