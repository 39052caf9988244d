#pragma once

// Ground-mode dynamics: magic-formula lateral tire force, friction ellipse,
// planar chassis translation/yaw, and the per-corner quarter-car suspension.
//
// Wheel order everywhere in this header: fl, fr, rl, rr.

#include <array>
#include <utility>

#include "landair/core.hpp"

namespace landair {

enum Corner : int { kFrontLeft = 0, kFrontRight = 1, kRearLeft = 2, kRearRight = 3 };

struct TireParams {
  double B = 10.0;
  double C = 1.9;
  double D = 1000.0;  // N, used only when load_scaled is false
  double E = 0.97;
  double mu = 0.9;
  bool load_scaled = true;  // peak factor D = mu * F_N

  double peak(double load) const { return load_scaled ? mu * load : D; }
};

/// Magic-formula lateral force for slip angle `alpha` under normal load.
inline double tire_lateral_force(double alpha, double load, const TireParams& tp) {
  if (load < 0.0) throw InvalidArgument("tire_lateral_force: negative load");
  const double ba = tp.B * alpha;
  return tp.peak(load) * std::sin(tp.C * std::atan(ba - tp.E * (ba - std::atan(ba))));
}

/// Combined-force limit with longitudinal priority: F_x is first limited to
/// mu F_N, then F_y to the remaining ellipse.
inline std::pair<double, double> friction_ellipse_clamp(double Fx, double Fy, double FN, double mu) {
  if (FN < 0.0) throw InvalidArgument("friction_ellipse_clamp: negative normal load");
  const double limit = mu * FN;
  Fx = clamp(Fx, -limit, limit);
  const double rest2 = limit * limit - Fx * Fx;
  if (Fx * Fx + Fy * Fy > limit * limit) {
    const double fy_max = std::sqrt(std::max(0.0, rest2));
    Fy = std::copysign(fy_max, Fy);
  }
  return {Fx, Fy};
}

// ---------------------------------------------------------------------------
// Quarter-car suspension

struct SuspensionParams {
  double m_s = 4.35;     // sprung mass share, kg
  double m_u = 0.8;      // unsprung mass, kg
  double K1 = 4000.0;    // shock absorber stiffness, N/m
  double K2 = 150000.0;  // tire stiffness, N/m
  double B1 = 105.0;     // N s/m
  double B2 = 150.0;     // N s/m
};

/// Vertical state of one corner; all displacements measured from static
/// equilibrium, z up.
struct SuspensionState {
  double z_s = 0.0;
  double zdot_s = 0.0;
  double z_u = 0.0;
  double zdot_u = 0.0;
  double q = 0.0;  // road input

  Vec4 vec() const { return {z_s, zdot_s, z_u, zdot_u}; }
  double stroke() const { return z_s - z_u; }
};

/// x' = A x + B1 f_a + B2 q + B3 f_d with x = (z_s, z_s', z_u, z_u').
/// Both damping coefficients act on the strut's relative velocity.
struct SuspensionStateSpace {
  Mat4 A = Mat4::Zero();
  Vec4 B_actuator = Vec4::Zero();
  Vec4 B_road = Vec4::Zero();
  Vec4 B_disturbance = Vec4::Zero();
};

inline SuspensionStateSpace suspension_state_space(const SuspensionParams& sp) {
  const double b = sp.B1 + sp.B2;
  SuspensionStateSpace ss;
  ss.A << 0, 1, 0, 0,                                                   //
      -sp.K1 / sp.m_s, -b / sp.m_s, sp.K1 / sp.m_s, b / sp.m_s,         //
      0, 0, 0, 1,                                                       //
      sp.K1 / sp.m_u, b / sp.m_u, -(sp.K1 + sp.K2) / sp.m_u, -b / sp.m_u;
  ss.B_actuator << 0, 1.0 / sp.m_s, 0, -1.0 / sp.m_u;
  ss.B_road << 0, 0, 0, sp.K2 / sp.m_u;
  ss.B_disturbance << 0, -1.0 / sp.m_s, 0, 0;
  return ss;
}

inline Vec4 suspension_derivs(const SuspensionState& s, double f_a, double f_d, double q,
                              const SuspensionParams& sp) {
  const auto ss = suspension_state_space(sp);
  return ss.A * s.vec() + ss.B_actuator * f_a + ss.B_road * q + ss.B_disturbance * f_d;
}

/// Tire normal load: static weight share plus the unsprung-mass balance,
/// clamped at zero when the wheel lifts off.
inline double tire_normal_load(const SuspensionState& s, const SuspensionParams& sp,
                               double g = kGravity) {
  const double zdd_u = suspension_derivs(s, 0.0, 0.0, s.q, sp)[3];
  const double b = sp.B1 + sp.B2;
  const double dynamic =
      sp.m_u * zdd_u + b * (s.zdot_u - s.zdot_s) + sp.K1 * (s.z_u - s.z_s);
  return std::max(0.0, (sp.m_s + sp.m_u) * g + dynamic);
}

/// Spring plus kinetic energy of one corner about equilibrium.
inline double suspension_energy(const SuspensionState& s, const SuspensionParams& sp) {
  const double d = s.z_s - s.z_u;
  const double t = s.z_u - s.q;
  return 0.5 * sp.m_s * s.zdot_s * s.zdot_s + 0.5 * sp.m_u * s.zdot_u * s.zdot_u +
         0.5 * sp.K1 * d * d + 0.5 * sp.K2 * t * t;
}

// ---------------------------------------------------------------------------
// Planar chassis

struct ChassisParams {
  double M_b = 20.62;    // kg
  double J_z = 1.2;      // kg m^2
  double L_f = 0.30;     // m
  double L_r = 0.30;     // m
  double b = 0.50;       // track width, m
  double rho = 1.225;    // kg/m^3
  double c_w = 0.9;
  double A = 0.25;       // frontal area, m^2
  double wheel_radius = 0.10;
  double v_eps = 0.5;    // slip-angle regularization speed, m/s

  double wheelbase() const { return L_f + L_r; }
  /// Body-frame (x, y) of each wheel contact.
  std::array<Eigen::Vector2d, 4> wheel_xy() const {
    return {Eigen::Vector2d{L_f, b / 2}, Eigen::Vector2d{L_f, -b / 2},
            Eigen::Vector2d{-L_r, b / 2}, Eigen::Vector2d{-L_r, -b / 2}};
  }
};

/// Per-wheel steering from a single bicycle-model angle (positive = left).
inline std::array<double, 4> ackermann(double delta, const ChassisParams& cp) {
  if (std::abs(delta) < 1e-12) return {0.0, 0.0, 0.0, 0.0};
  const double L = cp.wheelbase();
  const double t = std::tan(delta);
  const double left = std::atan(L * t / (L - 0.5 * cp.b * t));
  const double right = std::atan(L * t / (L + 0.5 * cp.b * t));
  return {left, right, 0.0, 0.0};
}

/// Rotates wheel-frame forces (F_x along the wheel, F_y across it) into the
/// chassis frame. Returns (F_L, F_Q).
inline std::pair<double, double> wheel_to_chassis(double Fx, double Fy, double delta) {
  const double c = std::cos(delta), s = std::sin(delta);
  return {Fx * c - Fy * s, Fx * s + Fy * c};
}

struct ChassisInputs {
  std::array<double, 4> drive_torque{0, 0, 0, 0};  // N m
  std::array<double, 4> steer{0, 0, 0, 0};         // rad
  double U4 = 0.0;                                 // yaw moment, N m
};

/// Body-frame velocities of the planar chassis.
struct PlanarVelocity {
  double v_x = 0.0;
  double v_y = 0.0;
  double r = 0.0;
};

struct PlanarAccel {
  double a_x = 0.0;
  double a_y = 0.0;
  double psi_dd = 0.0;
};

/// Wheel-frame longitudinal/lateral velocity of wheel `i`.
inline std::pair<double, double> wheel_velocity(const PlanarVelocity& v, int i, double delta,
                                                const ChassisParams& cp) {
  const auto xy = cp.wheel_xy()[i];
  const double vx = v.v_x - v.r * xy.y();
  const double vy = v.v_y + v.r * xy.x();
  const double c = std::cos(delta), s = std::sin(delta);
  return {vx * c + vy * s, -vx * s + vy * c};
}

/// Lateral slip angle with a low-speed floor on the longitudinal speed.
inline double slip_angle(double v_long, double v_lat, double v_eps) {
  return std::atan2(v_lat, std::max(std::abs(v_long), v_eps));
}

/// Chassis translational and yaw accelerations for given wheel forces already
/// expressed in each wheel's frame.
inline PlanarAccel chassis_accel_from_wheel_forces(const PlanarVelocity& v,
                                                   const std::array<double, 4>& Fx,
                                                   const std::array<double, 4>& Fy,
                                                   const ChassisInputs& in,
                                                   const ChassisParams& cp) {
  std::array<double, 4> FL{}, FQ{};
  for (int i = 0; i < 4; ++i) std::tie(FL[i], FQ[i]) = wheel_to_chassis(Fx[i], Fy[i], in.steer[i]);
  const double drag = 0.5 * cp.rho * cp.c_w * cp.A * v.v_x * std::abs(v.v_x);
  PlanarAccel a;
  a.a_x = (FL[0] + FL[1] + FL[2] + FL[3] - drag) / cp.M_b;
  a.a_y = (FQ[0] + FQ[1] + FQ[2] + FQ[3]) / cp.M_b;
  a.psi_dd = (0.5 * cp.b * (FL[kFrontRight] + FL[kRearRight] - FL[kFrontLeft] - FL[kRearLeft]) +
              (FQ[kFrontLeft] + FQ[kFrontRight]) * cp.L_f -
              (FQ[kRearLeft] + FQ[kRearRight]) * cp.L_r + in.U4) /
             cp.J_z;
  return a;
}

/// Full planar derivative: tire forces from slip, drive torque, ellipse clamp.
inline PlanarAccel chassis_planar_derivs(const PlanarVelocity& v, const ChassisInputs& in,
                                         const std::array<double, 4>& normal_loads,
                                         const ChassisParams& cp, const TireParams& tp) {
  std::array<double, 4> Fx{}, Fy{};
  for (int i = 0; i < 4; ++i) {
    const auto [vl, vq] = wheel_velocity(v, i, in.steer[i], cp);
    const double alpha = slip_angle(vl, vq, cp.v_eps);
    const double fx = in.drive_torque[i] / cp.wheel_radius;
    const double fy = -tire_lateral_force(alpha, normal_loads[i], tp);
    std::tie(Fx[i], Fy[i]) = friction_ellipse_clamp(fx, fy, normal_loads[i], tp.mu);
  }
  return chassis_accel_from_wheel_forces(v, Fx, Fy, in, cp);
}

/// Static normal loads of the planar model (front/rear split by CoM position).
inline std::array<double, 4> static_wheel_loads(const ChassisParams& cp, double g = kGravity) {
  const double W = cp.M_b * g;
  const double front = 0.5 * W * cp.L_r / cp.wheelbase();
  const double rear = 0.5 * W * cp.L_f / cp.wheelbase();
  return {front, front, rear, rear};
}

}  // namespace landair
