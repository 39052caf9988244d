#pragma once

// Attitude representation and body <-> global transforms.
//
// Frames: global is z-up (gravity along -z), body is x forward, y left,
// z up. Euler angles follow the Z-Y-X (yaw, pitch, roll) sequence.

#include "landair/core.hpp"

namespace landair {

struct EulerAngles {
  double phi = 0.0;    // roll
  double theta = 0.0;  // pitch
  double psi = 0.0;    // yaw

  Vec3 vec() const { return {phi, theta, psi}; }
  static EulerAngles from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
  bool finite() const { return std::isfinite(phi) && std::isfinite(theta) && std::isfinite(psi); }
};

struct BodyRates {
  double p = 0.0;
  double q = 0.0;
  double r = 0.0;

  Vec3 vec() const { return {p, q, r}; }
  static BodyRates from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

using RotationMatrix3 = Mat3;

inline constexpr double kGimbalMargin = 1e-6;

/// Body-to-global rotation for Z-Y-X Euler angles.
///
/// The printed (1,3) entry of the reference matrix carries a sign error; this
/// is the orthonormal form, equal to Rz(psi) * Ry(theta) * Rx(phi).
inline RotationMatrix3 euler_to_rotation(const EulerAngles& e) {
  if (!e.finite()) throw InvalidArgument("euler_to_rotation: non-finite angle");
  const double cf = std::cos(e.phi), sf = std::sin(e.phi);
  const double ct = std::cos(e.theta), st = std::sin(e.theta);
  const double cp = std::cos(e.psi), sp = std::sin(e.psi);
  RotationMatrix3 m;
  m << cp * ct, cp * st * sf - sp * cf, cf * cp * st + sf * sp,  //
      sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf,   //
      -st, ct * sf, ct * cf;
  return m;
}

/// Maps body rates (p, q, r) to Euler angle rates.
inline RotationMatrix3 euler_rate_transform(const EulerAngles& e) {
  if (!e.finite()) throw InvalidArgument("euler_rate_transform: non-finite angle");
  if (std::abs(e.theta) >= kPi / 2.0 - kGimbalMargin) {
    throw GimbalLockError("euler_rate_transform: pitch at gimbal lock");
  }
  const double cf = std::cos(e.phi), sf = std::sin(e.phi);
  const double ct = std::cos(e.theta), tt = std::tan(e.theta);
  RotationMatrix3 m;
  m << 1.0, sf * tt, cf * tt,  //
      0.0, cf, -sf,            //
      0.0, sf / ct, cf / ct;
  return m;
}

/// Inverse of euler_to_rotation: atan2-based Z-Y-X extraction. Pitch is
/// returned in [-pi/2, pi/2], roll and yaw in (-pi, pi].
inline EulerAngles rotation_to_euler(const RotationMatrix3& r) {
  EulerAngles e;
  e.theta = std::asin(clamp(-r(2, 0), -1.0, 1.0));
  e.phi = std::atan2(r(2, 1), r(2, 2));
  e.psi = std::atan2(r(1, 0), r(0, 0));
  return e;
}

inline Mat3 rot_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

inline Mat3 rot_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

inline Mat3 rot_z(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

}  // namespace landair
