#pragma once

// Default physical parameter set of the robot and JSON overrides.

#include <string>

#include "json.hpp"
#include "landair/chassis_dynamics.hpp"
#include "landair/flight_dynamics.hpp"
#include "landair/ground_effect.hpp"

namespace landair {

/// Body-frame placement of the wheels, rotors and suspension travel.
struct Geometry {
  double rotor_hub_z = 0.15;        // rotor plane above the CoM, m
  double wheel_droop_z = -0.19;     // wheel centre at full droop, relative to CoM, m
  double stroke_max = 0.08;         // m
  double k_stop = 1.0e5;            // droop/bump stop stiffness, N/m
  double c_brake = 2500.0;          // braking force per unit slip speed, N s/m
  double max_drive_torque = 20.0;   // N m per wheel
};

/// Foldable arm layout; deployed arms point along the rotor diagonals.
struct ArmLayout {
  double hinge_radius = 0.10;
  double length = 0.2786;
  double mass = 0.4;
  double tip_mass = 0.8;
  double width = 0.03;
  double fold_tilt = deg2rad(20.0);  // front arms when folded
};

struct RobotParams {
  FlightParams flight;
  ChassisParams chassis;
  TireParams tire;
  SuspensionParams suspension;
  GroundEffectParams ground;
  Geometry geometry;
  ArmLayout arms;

  double total_mass() const { return flight.m; }
  double unsprung_mass() const { return suspension.m_u; }
  double sprung_mass() const { return flight.m - 4.0 * suspension.m_u; }
  double weight() const { return flight.m * flight.g; }

  /// Wheel centre in body axes for stroke s (compression from full droop).
  Vec3 wheel_center_body(int corner, double stroke) const {
    const auto xy = chassis.wheel_xy()[corner];
    return {xy.x(), xy.y(), geometry.wheel_droop_z + stroke};
  }
  /// Rotor hub in body axes, rotor order.
  Vec3 rotor_hub_body(int rotor) const {
    const auto xy = rotor_positions_xy(flight)[rotor];
    return {xy.x(), xy.y(), geometry.rotor_hub_z};
  }
};

/// Arm configurations for a fold state: fold = 0 deployed, 1 folded; one
/// value per pair (front, rear). Arms are listed in rotor order.
inline std::vector<ArmConfig> arm_configs(const RobotParams& p, double front_fold, double rear_fold) {
  std::vector<ArmConfig> arms;
  const auto xy = rotor_positions_xy(p.flight);
  for (int i = 0; i < 4; ++i) {
    ArmConfig a;
    a.mass = p.arms.mass;
    a.tip_mass = p.arms.tip_mass;
    a.length = p.arms.length;
    a.width = p.arms.width;
    const double heading = std::atan2(xy[i].y(), xy[i].x());
    a.hinge = Vec3{p.arms.hinge_radius * std::cos(heading), p.arms.hinge_radius * std::sin(heading),
                   p.geometry.rotor_hub_z};
    a.front = xy[i].x() > 0.0;
    const double f = a.front ? front_fold : rear_fold;
    // Folded arms lie along the body: front arms point back, rear arms forward.
    const double folded_heading = a.front ? (xy[i].y() > 0 ? kPi - 0.2 : -kPi + 0.2)
                                          : (xy[i].y() > 0 ? 0.2 : -0.2);
    a.theta = heading + f * (folded_heading - heading);
    a.gamma = a.front ? f * p.arms.fold_tilt : 0.0;
    a.folded = f >= 1.0;
    arms.push_back(a);
  }
  return arms;
}

namespace detail {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

inline void require_object(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

}  // namespace detail

/// Overrides any subset of the defaults, e.g. {"flight": {"m": 21.0}}.
inline void apply_overrides(RobotParams& p, const nlohmann::json& j) {
  using detail::read_if;
  detail::require_object(j, "params");
  if (j.contains("flight")) {
    const auto& f = j.at("flight");
    detail::require_object(f, "params.flight");
    auto& q = p.flight;
    for (auto [k, v] : std::initializer_list<std::pair<const char*, double*>>{
             {"m", &q.m}, {"Jx", &q.Jx}, {"Jy", &q.Jy}, {"Jz", &q.Jz}, {"l", &q.l},
             {"alpha", &q.alpha}, {"c_omega", &q.c_omega}, {"c_m", &q.c_m}, {"d_x", &q.d_x},
             {"d_y", &q.d_y}, {"d_z", &q.d_z}, {"d_phi", &q.d_phi}, {"d_theta", &q.d_theta},
             {"d_psi", &q.d_psi}, {"J_r", &q.J_r}, {"omega_max", &q.omega_max}, {"g", &q.g}}) {
      read_if(f, k, *v, "params.flight");
    }
  }
  if (j.contains("tire")) {
    const auto& t = j.at("tire");
    detail::require_object(t, "params.tire");
    read_if(t, "B", p.tire.B, "params.tire");
    read_if(t, "C", p.tire.C, "params.tire");
    read_if(t, "D", p.tire.D, "params.tire");
    read_if(t, "E", p.tire.E, "params.tire");
    read_if(t, "mu", p.tire.mu, "params.tire");
    read_if(t, "load_scaled", p.tire.load_scaled, "params.tire");
  }
  if (j.contains("suspension")) {
    const auto& s = j.at("suspension");
    detail::require_object(s, "params.suspension");
    read_if(s, "m_s", p.suspension.m_s, "params.suspension");
    read_if(s, "m_u", p.suspension.m_u, "params.suspension");
    read_if(s, "K1", p.suspension.K1, "params.suspension");
    read_if(s, "K2", p.suspension.K2, "params.suspension");
    read_if(s, "B1", p.suspension.B1, "params.suspension");
    read_if(s, "B2", p.suspension.B2, "params.suspension");
  }
  if (j.contains("chassis")) {
    const auto& c = j.at("chassis");
    detail::require_object(c, "params.chassis");
    read_if(c, "J_z", p.chassis.J_z, "params.chassis");
    read_if(c, "L_f", p.chassis.L_f, "params.chassis");
    read_if(c, "L_r", p.chassis.L_r, "params.chassis");
    read_if(c, "b", p.chassis.b, "params.chassis");
    read_if(c, "wheel_radius", p.chassis.wheel_radius, "params.chassis");
    read_if(c, "v_eps", p.chassis.v_eps, "params.chassis");
  }
  if (j.contains("ground_effect")) {
    const auto& g = j.at("ground_effect");
    detail::require_object(g, "params.ground_effect");
    read_if(g, "R", p.ground.R, "params.ground_effect");
    read_if(g, "cutoff", p.ground.cutoff, "params.ground_effect");
    read_if(g, "floor_factor", p.ground.floor_factor, "params.ground_effect");
  }
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    detail::require_object(g, "params.geometry");
    read_if(g, "rotor_hub_z", p.geometry.rotor_hub_z, "params.geometry");
    read_if(g, "wheel_droop_z", p.geometry.wheel_droop_z, "params.geometry");
    read_if(g, "stroke_max", p.geometry.stroke_max, "params.geometry");
    read_if(g, "k_stop", p.geometry.k_stop, "params.geometry");
    read_if(g, "c_brake", p.geometry.c_brake, "params.geometry");
  }
  p.chassis.M_b = p.flight.m;
  p.ground.rho = p.chassis.rho;
}

}  // namespace landair
