#pragma once

// Equivalent ground-effect model: a single-rotor thrust multiplier from
// height above the ground and horizontal airspeed (method of images).

#include <array>

#include "landair/core.hpp"

namespace landair {

struct GroundEffectParams {
  double R = 0.3302;          // propeller radius, m (26 in propeller)
  double rho = 1.225;         // kg/m^3
  double cutoff = 0.5;        // above this height the ratio is exactly 1, m
  double floor_factor = 0.3;  // z_floor = floor_factor * R

  double disc_area() const { return kPi * R * R; }
  double z_floor() const { return floor_factor * R; }
};

/// Momentum-theory hover induced velocity for one rotor.
inline double induced_velocity(double thrust, const GroundEffectParams& p) {
  if (thrust < 0.0) throw InvalidArgument("induced_velocity: negative thrust");
  return std::sqrt(thrust / (2.0 * p.rho * p.disc_area()));
}

struct ThrustRatio {
  double ratio = 1.0;
  bool saturated = false;  // z was below z_floor and got clamped
};

/// T_IGE / T_OGE for a rotor at height z with horizontal speed V.
inline ThrustRatio thrust_ratio(double z, double V, double v_i, const GroundEffectParams& p) {
  if (v_i < 0.0) throw InvalidArgument("thrust_ratio: negative induced velocity");
  if (!std::isfinite(z) || !std::isfinite(V)) throw InvalidArgument("thrust_ratio: non-finite input");
  ThrustRatio out;
  if (z > p.cutoff) return out;
  if (z < p.z_floor()) {
    z = p.z_floor();
    out.saturated = true;
  }
  double speed_term = 0.0;
  if (std::abs(V) > 0.0) {
    if (v_i == 0.0) return out;  // infinite advance ratio washes the effect out
    speed_term = (V / v_i) * (V / v_i);
  }
  const double k = p.R / (4.0 * z);
  out.ratio = 1.0 / (1.0 - k * k / (1.0 + speed_term));
  return out;
}

inline double effective_thrust(double T_cmd, double z, double V, const GroundEffectParams& p) {
  if (T_cmd <= 0.0) return 0.0;
  return T_cmd * thrust_ratio(z, V, induced_velocity(T_cmd, p), p).ratio;
}

/// Velocity potential of the image source used to derive the ratio.
inline double image_source_potential(const Vec3& point, const Vec3& source, double z,
                                     const GroundEffectParams& p) {
  const double k = p.R / (4.0 * z);
  return -(k * k) / (point - source).norm();
}

/// Thrust and body roll/pitch moments from four rotors with individual
/// heights above the terrain. `xy` holds the rotor hub positions.
struct RotorSetWrench {
  std::array<double, 4> thrust{};
  double total = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
};

inline RotorSetWrench ground_effect_wrench(const std::array<double, 4>& T_cmd,
                                           const std::array<double, 4>& heights, double V,
                                           const std::array<Eigen::Vector2d, 4>& xy,
                                           const GroundEffectParams& p) {
  RotorSetWrench w;
  for (int i = 0; i < 4; ++i) {
    w.thrust[i] = effective_thrust(T_cmd[i], heights[i], V, p);
    w.total += w.thrust[i];
    w.roll += xy[i].y() * w.thrust[i];
    w.pitch += -xy[i].x() * w.thrust[i];
  }
  return w;
}

}  // namespace landair
