#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace phaselab {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Reduce an angle to [0, 2*pi).
inline double wrap_angle(double phi) {
  double r = std::fmod(phi, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (r == kTwoPi) r = 0.0;
  return r;
}

/// Point on the Bloch sphere as a Cartesian unit vector.
struct UnitVector3 {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  double dot(const UnitVector3& o) const { return x * o.x + y * o.y + z * o.z; }
  UnitVector3 operator-() const { return {-x, -y, -z}; }
  bool operator==(const UnitVector3& o) const { return x == o.x && y == o.y && z == o.z; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

/// Point on the Bloch sphere in polar coordinates: theta in [0, pi] from the
/// +z pole, phi the azimuth (the relative phase of the two modes).
struct SphericalDirection {
  double theta;
  double phi;

  SphericalDirection(double theta_, double phi_) : theta(theta_), phi(wrap_angle(phi_)) {
    if (!(theta >= 0.0 && theta <= kPi))
      throw std::invalid_argument("SphericalDirection: theta outside [0, pi]");
  }
};

inline UnitVector3 direction_to_vector(const SphericalDirection& d) {
  const double s = std::sin(d.theta);
  return {s * std::cos(d.phi), s * std::sin(d.phi), std::cos(d.theta)};
}

/// Equatorial unit vector at the given azimuth, with exact zeros at the
/// cardinal points so antipodal channel pairs are exactly antipodal.
inline UnitVector3 equatorial_vector(double phi) {
  const double w = wrap_angle(phi);
  if (w == 0.0) return {1.0, 0.0, 0.0};
  if (w == 0.5 * kPi) return {0.0, 1.0, 0.0};
  if (w == kPi) return {-1.0, 0.0, 0.0};
  if (w == 1.5 * kPi) return {0.0, -1.0, 0.0};
  return {std::cos(w), std::sin(w), 0.0};
}

/// One output channel of a detection network: a Bloch direction u_s and the
/// rate share w_s.  A detection multiplies the phase density by
/// g_s = w_s (1 + u_s . u).
struct DetectorChannel {
  std::string id;
  UnitVector3 direction;
  double weight = 1.0;
};

/// Pair of balanced beam splitters mixing the two modes before detection,
/// the second with an extra phase shift xi on one arm.  The four output
/// channels sit on the equator at azimuths {0, pi, xi, xi + pi}, each with
/// rate share 1/4.
inline std::array<DetectorChannel, 4> beam_splitter_channels(double xi) {
  return {DetectorChannel{"1", equatorial_vector(0.0), 0.25},
          DetectorChannel{"2", equatorial_vector(kPi), 0.25},
          DetectorChannel{"3", equatorial_vector(xi), 0.25},
          DetectorChannel{"4", equatorial_vector(xi + kPi), 0.25}};
}

/// Coherent coupling of strength delta between the modes, optionally with an
/// energy splitting epsilon between them.
struct CouplingSpec {
  double delta = 0.0;
  double epsilon = 0.0;

  double omega() const { return std::sqrt(delta * delta + epsilon * epsilon); }
};

/// Detector directions for direct (per-mode) detection after a coupling
/// pulse of area delta*tau: the pulse rotates the state about +x, so the
/// effective detectors are the +/-z axes counter-rotated by the pulse area.
inline std::array<DetectorChannel, 2> pulsed_counterrotated_channels(double pulse_area) {
  const UnitVector3 ua{0.0, -std::sin(pulse_area), std::cos(pulse_area)};
  return {DetectorChannel{"a", ua, 0.5}, DetectorChannel{"b", -ua, 0.5}};
}

/// Detector direction at time t for mode a under continuous coupling in the
/// rotating frame of the coupling (Rabi frequency omega = sqrt(eps^2+delta^2)).
/// At t = 0 this is +z; for epsilon = 0 it precesses in the y-z plane.
inline UnitVector3 coupled_detector_direction(const CouplingSpec& c, double t) {
  const double om = c.omega();
  if (om == 0.0) return {0.0, 0.0, 1.0};
  const double ct = std::cos(om * t);
  const double st = std::sin(om * t);
  return {c.epsilon * c.delta * (ct - 1.0) / (om * om),
          -c.delta * st / om,
          (c.delta * c.delta * ct + c.epsilon * c.epsilon) / (om * om)};
}

/// Per-mode detection channels at time t under continuous coupling.
inline std::array<DetectorChannel, 2> coupled_channels(const CouplingSpec& c, double t) {
  const UnitVector3 ua = coupled_detector_direction(c, t);
  return {DetectorChannel{"a", ua, 0.5}, DetectorChannel{"b", -ua, 0.5}};
}

}  // namespace phaselab
