#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <utility>
#include <vector>

#include "phaselab/detstat.hpp"
#include "phaselab/distribution.hpp"
#include "phaselab/errors.hpp"
#include "phaselab/geometry.hpp"
#include "phaselab/special.hpp"

namespace phaselab {

/// State vector in the N-particle sector of two bosonic modes, expanded over
/// |n, N-n> for n = 0..N (n = occupation of mode a).
struct TwoModeFockVector {
  int N = 0;
  Eigen::VectorXcd amplitudes;
};

/// Spin-coherent state of N particles at (theta, phi):
/// amplitudes C(N,n)^{1/2} cos^n(theta/2) sin^{N-n}(theta/2) e^{i(N-n)phi}.
inline TwoModeFockVector scs_amplitudes(int N, double theta, double phi) {
  if (N < 0) throw std::invalid_argument("scs_amplitudes: N must be >= 0");
  TwoModeFockVector v;
  v.N = N;
  v.amplitudes.resize(N + 1);
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  for (int n = 0; n <= N; ++n) {
    const double mag = std::exp(0.5 * log_binomial(N, n)) *
                       (n > 0 ? std::pow(c, n) : 1.0) * (N - n > 0 ? std::pow(s, N - n) : 1.0);
    v.amplitudes(n) = std::polar(mag, (N - n) * phi);
  }
  return v;
}

enum class Mode { a, b };

/// Ladder action of one mode's annihilation operator; result lives in the
/// (N-1)-particle sector and is intentionally unnormalized.  N = 0 maps to
/// the zero vector.
inline TwoModeFockVector apply_annihilation(const TwoModeFockVector& v, Mode mode) {
  TwoModeFockVector out;
  if (v.N == 0) {
    out.N = 0;
    out.amplitudes = Eigen::VectorXcd::Zero(1);
    return out;
  }
  out.N = v.N - 1;
  out.amplitudes = Eigen::VectorXcd::Zero(v.N);
  for (int n = 0; n < v.N; ++n) {
    if (mode == Mode::a)
      out.amplitudes(n) = std::sqrt(static_cast<double>(n + 1)) * v.amplitudes(n + 1);
    else
      out.amplitudes(n) = std::sqrt(static_cast<double>(v.N - n)) * v.amplitudes(n);
  }
  return out;
}

/// c(u0) = cos(theta0/2) a + sin(theta0/2) e^{-i phi0} b -- the annihilator
/// of the mode a detector pointing along u0 responds to.
inline TwoModeFockVector apply_mode_annihilation(const TwoModeFockVector& v, double theta0, double phi0) {
  const TwoModeFockVector va = apply_annihilation(v, Mode::a);
  const TwoModeFockVector vb = apply_annihilation(v, Mode::b);
  TwoModeFockVector out;
  out.N = va.N;
  out.amplitudes = std::cos(0.5 * theta0) * va.amplitudes +
                   std::polar(std::sin(0.5 * theta0), -phi0) * vb.amplitudes;
  return out;
}

/// Ladder action of one mode's creation operator; result lives in the
/// (N+1)-particle sector and is intentionally unnormalized.
inline TwoModeFockVector apply_creation(const TwoModeFockVector& v, Mode mode) {
  TwoModeFockVector out;
  out.N = v.N + 1;
  out.amplitudes = Eigen::VectorXcd::Zero(out.N + 1);
  for (int n = 0; n <= v.N; ++n) {
    if (mode == Mode::a)
      out.amplitudes(n + 1) += std::sqrt(static_cast<double>(n + 1)) * v.amplitudes(n);
    else
      out.amplitudes(n) += std::sqrt(static_cast<double>(out.N - n)) * v.amplitudes(n);
  }
  return out;
}

/// c†(u0) = cos(theta0/2) a† + sin(theta0/2) e^{i phi0} b†.  Applying it N
/// times to the vacuum and dividing by sqrt(N!) builds the SCS at (theta0, phi0).
inline TwoModeFockVector apply_mode_creation(const TwoModeFockVector& v, double theta0, double phi0) {
  const TwoModeFockVector va = apply_creation(v, Mode::a);
  const TwoModeFockVector vb = apply_creation(v, Mode::b);
  TwoModeFockVector out;
  out.N = va.N;
  out.amplitudes = std::cos(0.5 * theta0) * va.amplitudes +
                   std::polar(std::sin(0.5 * theta0), phi0) * vb.amplitudes;
  return out;
}

/// Polar angles of a unit vector.
inline std::pair<double, double> vector_to_angles(const UnitVector3& u) {
  const double theta = std::acos(std::clamp(u.z, -1.0, 1.0));
  const double phi = std::atan2(u.y, u.x);
  return {theta, phi};
}

/// Poisson mixture of SCS over total particle number ("coherent state with a
/// known phase but Poissonian amplitude"), truncated at N_max.
struct PoissonMixedState {
  double R = 1.0;
  double theta = 0.5 * kPi;
  double phi = 0.0;
  int N_max = 0;
};

/// Smallest truncation meeting the tail invariant for strengths up to
/// desk scale (tail mass < 1e-12).
inline int required_n_max(double R) { return static_cast<int>(std::ceil(R * R + 12.0 * R + 20.0)); }

/// Poisson tail mass beyond N_max for mean R^2.
inline double poisson_tail(double R, int N_max) {
  const double mean = R * R;
  double cdf = 0.0;
  for (int k = 0; k <= N_max; ++k) cdf += poisson_pmf(k, mean);
  return 1.0 - cdf;
}

inline void check_truncation(double R, int N_max) {
  if (N_max < 0 || poisson_tail(R, N_max) >= 1e-12) throw TruncationError();
}

/// Detection rate factor Tr[c(u0) rho c†(u0)] computed by brute summation
/// over the truncated Poisson mixture; the Bloch-sphere calculus says this
/// is (R^2/2)(1 + u . u0).
inline double detection_factor_oracle(const PoissonMixedState& state, const UnitVector3& u0) {
  check_truncation(state.R, state.N_max);
  const auto [theta0, phi0] = vector_to_angles(u0);
  double total = 0.0;
  for (int N = 0; N <= state.N_max; ++N) {
    const TwoModeFockVector v = scs_amplitudes(N, state.theta, state.phi);
    const TwoModeFockVector cv = apply_mode_annihilation(v, theta0, phi0);
    total += poisson_pmf(N, state.R * state.R) * cv.amplitudes.squaredNorm();
  }
  return total;
}

namespace detail {

/// rho -> c rho c† on one N-particle block, using the two-diagonal structure
/// of the annihilator (O(N^2) instead of a dense triple product).
inline Eigen::MatrixXcd jump_block(const Eigen::MatrixXcd& rho, int N, double theta0, double phi0) {
  const double ct = std::cos(0.5 * theta0);
  const std::complex<double> stp = std::polar(std::sin(0.5 * theta0), -phi0);
  Eigen::MatrixXcd left(N, N + 1);  // c rho
  for (int r = 0; r < N; ++r)
    left.row(r) = ct * std::sqrt(static_cast<double>(r + 1)) * rho.row(r + 1) +
                  stp * std::sqrt(static_cast<double>(N - r)) * rho.row(r);
  Eigen::MatrixXcd out(N, N);  // (c rho) c†
  for (int c = 0; c < N; ++c)
    out.col(c) = ct * std::sqrt(static_cast<double>(c + 1)) * left.col(c + 1) +
                 std::conj(stp) * std::sqrt(static_cast<double>(N - c)) * left.col(c);
  return out;
}

}  // namespace detail

/// Probability density of a full detection history, computed from first
/// principles in the truncated double-Fock basis: no-jump intervals damp the
/// N-particle block by e^{-Gamma N dt}, a detection in channel s applies
/// Gamma 2 w_s c(u_s) rho c†(u_s).  Initial phase: uniform on a ring
/// (averaged over `ring_nodes` azimuths) or a known point.  Intended for
/// small histories (L <= 6) at R <= 2.
inline double history_prob_oracle(const SourceParams& src, std::span<const DetectorChannel> channels,
                                  std::span<const std::pair<double, int>> events,
                                  const BaseMeasure& init, int ring_nodes = 64) {
  if (init.kind == BaseMeasure::Kind::uniform_sphere)
    throw ConfigError("history_prob_oracle: ring or point initial base required");
  const int N_max = required_n_max(src.R);
  check_truncation(src.R, N_max);
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].second < 0 || events[i].second >= static_cast<int>(channels.size()))
      throw ConfigError("history_prob_oracle: channel index out of range");
    if (events[i].first < 0.0 || events[i].first > src.T ||
        (i > 0 && events[i].first < events[i - 1].first))
      throw ConfigError("history_prob_oracle: event times must be sorted within [0, T]");
  }

  const int nodes = init.kind == BaseMeasure::Kind::ring ? ring_nodes : 1;
  double result = 0.0;
  for (int node = 0; node < nodes; ++node) {
    const double phi0 = init.kind == BaseMeasure::Kind::ring ? kTwoPi * node / nodes : init.phi0;
    // diagonal-in-N density matrix of the Poisson-mixed SCS at (theta0, phi0)
    std::vector<Eigen::MatrixXcd> blocks;
    blocks.reserve(static_cast<std::size_t>(N_max + 1));
    for (int N = 0; N <= N_max; ++N) {
      const TwoModeFockVector v = scs_amplitudes(N, init.theta0, phi0);
      blocks.push_back(poisson_pmf(N, src.R * src.R) * (v.amplitudes * v.amplitudes.adjoint()));
    }
    double t_prev = 0.0;
    for (const auto& [t, ch] : events) {
      for (int N = 1; N <= N_max; ++N) blocks[static_cast<std::size_t>(N)] *= std::exp(-src.Gamma * N * (t - t_prev));
      const auto [th, ph] = vector_to_angles(channels[static_cast<std::size_t>(ch)].direction);
      const double rate = src.Gamma * 2.0 * channels[static_cast<std::size_t>(ch)].weight;
      for (int N = 0; N < N_max; ++N)
        blocks[static_cast<std::size_t>(N)] = rate * detail::jump_block(blocks[static_cast<std::size_t>(N + 1)], N + 1, th, ph);
      blocks[static_cast<std::size_t>(N_max)].setZero();
      t_prev = t;
    }
    double tr = 0.0;
    for (int N = 0; N <= N_max; ++N)
      tr += (blocks[static_cast<std::size_t>(N)].trace() * std::exp(-src.Gamma * N * (src.T - t_prev))).real();
    result += tr / nodes;
  }
  return result;
}

}  // namespace phaselab
