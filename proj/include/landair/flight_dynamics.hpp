#pragma once

// Quadrotor rigid-body model: X-configuration mixer, gyroscopic and
// aerodynamic friction torques, Newton-Euler accelerations and the inertia
// contribution of the foldable arms.
//
// Rotor numbering (body frame, x forward, y left):
//   1 rear-right, 2 rear-left, 3 front-left, 4 front-right.
// Spin directions alternate (+, -, +, -).

#include <array>
#include <vector>

#include "landair/kinematics.hpp"

namespace landair {

struct FlightParams {
  double m = 20.62;            // kg
  double Jx = 1.0;             // kg m^2
  double Jy = 1.2;
  double Jz = 1.9;
  double l = 0.42;             // hub to rotor, m
  double alpha = kPi / 4.0;    // half inter-arm angle
  double c_omega = 2.6787e-4;  // N s^2 / rad^2
  double c_m = 4.2859e-6;      // N m s^2 / rad^2
  double d_x = 0.6, d_y = 0.6, d_z = 0.9;            // N s / m
  double d_phi = 0.4, d_theta = 0.4, d_psi = 0.3;    // N m s / rad
  double J_r = 6.0e-3;         // rotor spin inertia, kg m^2
  double omega_max = 790.0;    // rad/s
  double g = kGravity;

  Vec3 inertia_diag() const { return {Jx, Jy, Jz}; }
  double max_rotor_thrust() const { return c_omega * omega_max * omega_max; }
  double hover_speed() const { return std::sqrt(m * g / (4.0 * c_omega)); }
};

struct RotorSpeeds {
  std::array<double, 4> omega{0.0, 0.0, 0.0, 0.0};

  double& operator[](std::size_t i) { return omega[i]; }
  double operator[](std::size_t i) const { return omega[i]; }
  Vec4 squared() const {
    return {omega[0] * omega[0], omega[1] * omega[1], omega[2] * omega[2], omega[3] * omega[3]};
  }
  static RotorSpeeds uniform(double w) { return {{w, w, w, w}}; }
};

/// Collective thrust and roll/pitch/yaw torques in the body frame.
struct BodyWrench {
  double F = 0.0;
  double Fx = 0.0;
  double Fy = 0.0;
  double Fz = 0.0;

  Vec4 vec() const { return {F, Fx, Fy, Fz}; }
  Vec3 torque() const { return {Fx, Fy, Fz}; }
  static BodyWrench from(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
};

/// Maps squared rotor speeds to [F, Fx, Fy, Fz].
inline Mat4 mixer_matrix(const FlightParams& p) {
  const double c = p.c_omega;
  const double lr = c * p.l * std::sin(p.alpha);
  const double lp = c * p.l * std::cos(p.alpha);
  Mat4 m;
  m << c, c, c, c,             //
      -lr, lr, lr, -lr,        //
      lp, lp, -lp, -lp,        //
      p.c_m, -p.c_m, p.c_m, -p.c_m;
  return m;
}

/// Body-frame rotor hub positions (x, y) consistent with mixer_matrix.
inline std::array<Eigen::Vector2d, 4> rotor_positions_xy(const FlightParams& p) {
  const double sx = p.l * std::cos(p.alpha);
  const double sy = p.l * std::sin(p.alpha);
  return {Eigen::Vector2d{-sx, -sy}, Eigen::Vector2d{-sx, sy}, Eigen::Vector2d{sx, sy},
          Eigen::Vector2d{sx, -sy}};
}

inline BodyWrench mixer_forward(const RotorSpeeds& w, const FlightParams& p) {
  return BodyWrench::from(mixer_matrix(p) * w.squared());
}

struct MixerResult {
  RotorSpeeds speeds;
  bool clamped = false;
};

/// Solves the mixer for rotor speeds. Squared speeds above omega_max^2 are
/// clamped and flagged; a wrench that needs a negative squared speed throws.
inline MixerResult mixer_inverse(const BodyWrench& wr, const FlightParams& p) {
  const Vec4 sq = mixer_matrix(p).inverse() * wr.vec();
  const double wmax2 = p.omega_max * p.omega_max;
  const double tol = 1e-12 * std::max(1.0, sq.cwiseAbs().maxCoeff());
  MixerResult out;
  for (int i = 0; i < 4; ++i) {
    double s = sq[i];
    if (s < -tol) {
      throw InfeasibleWrench("mixer_inverse: rotor " + std::to_string(i + 1) +
                             " would need negative thrust");
    }
    if (s < 0.0) s = 0.0;
    if (s > wmax2) {
      s = wmax2;
      out.clamped = true;
    }
    out.speeds[i] = std::sqrt(s);
  }
  return out;
}

/// Saturating allocation for closed-loop use: keeps collective thrust and
/// sheds yaw first, then roll/pitch, until all squared speeds are in range.
inline MixerResult mixer_allocate(const BodyWrench& wr, const FlightParams& p) {
  const Mat4 inv = mixer_matrix(p).inverse();
  const double wmax2 = p.omega_max * p.omega_max;
  const double F = clamp(wr.F, 0.0, 4.0 * p.c_omega * wmax2);
  auto fits = [&](const Vec4& sq) { return sq.minCoeff() >= 0.0 && sq.maxCoeff() <= wmax2; };

  MixerResult out;
  Vec4 req{F, wr.Fx, wr.Fy, wr.Fz};
  Vec4 sq = inv * req;
  if (!fits(sq)) {
    out.clamped = true;
    // Bisect a common scale on yaw, then on roll/pitch.
    auto shrink = [&](int first, int last) {
      double lo = 0.0, hi = 1.0;
      Vec4 base = req;
      for (int k = first; k <= last; ++k) base[k] = 0.0;
      if (!fits(inv * base)) return false;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        Vec4 trial = req;
        for (int k = first; k <= last; ++k) trial[k] = mid * req[k];
        (fits(inv * trial) ? lo : hi) = mid;
      }
      for (int k = first; k <= last; ++k) req[k] *= lo;
      return true;
    };
    if (!shrink(3, 3)) {
      req[3] = 0.0;
      shrink(1, 2);
    }
    sq = inv * req;
  }
  for (int i = 0; i < 4; ++i) out.speeds[i] = std::sqrt(clamp(sq[i], 0.0, wmax2));
  return out;
}

/// Sum over rotors of omega_b x J_r (0, 0, (-1)^(i+1) Omega_i).
inline Vec3 gyroscopic_torque(const BodyRates& rates, const RotorSpeeds& w, const FlightParams& p) {
  const double h = p.J_r * (w[0] - w[1] + w[2] - w[3]);
  return rates.vec().cross(Vec3{0.0, 0.0, h});
}

/// diag(d_phi, d_theta, d_psi) applied to the attitude rates.
inline Vec3 aero_friction_torque(const Vec3& euler_rates, const FlightParams& p) {
  return Vec3{p.d_phi, p.d_theta, p.d_psi}.cwiseProduct(euler_rates);
}

/// Body angular acceleration: J w' = tau - w x J w - M_g - M_d, J diagonal.
inline Vec3 rotational_accel(const BodyRates& rates, const BodyWrench& wrench, const Vec3& M_g,
                             const Vec3& M_d, const FlightParams& p) {
  const Vec3 J = p.inertia_diag();
  const Vec3 w = rates.vec();
  const Vec3 coupling = w.cross(J.cwiseProduct(w));
  return (wrench.torque() - coupling - M_g - M_d).cwiseQuotient(J);
}

/// Global-frame translational acceleration of the flight module.
inline Vec3 translational_accel(const EulerAngles& e, const Vec3& vel, double F,
                                const FlightParams& p) {
  const Vec3 thrust = euler_to_rotation(e) * Vec3{0.0, 0.0, F};
  const Vec3 drag = Vec3{p.d_x, p.d_y, p.d_z}.cwiseProduct(vel);
  return (thrust - drag) / p.m - Vec3{0.0, 0.0, p.g};
}

// ---------------------------------------------------------------------------
// Foldable arms

/// Cuboid arm geometry for the steering-axis inertia formula.
struct ArmGeometry {
  double mass = 0.0;          // kg
  double front_length = 0.0;  // m
  double rear_length = 0.0;   // m
  double width = 0.0;         // cross-section width, m
  double gamma = 0.0;         // front-arm tilt, rad
};

struct ArmPairInertia {
  double front = 0.0;
  double rear = 0.0;
};

/// Steering-axis inertia of the front and rear arms. The trailing length
/// factor is taken as each arm's own full length.
inline ArmPairInertia arm_inertia(const ArmGeometry& a) {
  const double w2 = a.width * a.width;
  const double lf2 = a.front_length * a.front_length;
  const double lr2 = a.rear_length * a.rear_length;
  return {a.mass / 12.0 * lf2 * std::cos(a.gamma) * (w2 + lf2),
          a.mass / 12.0 * lr2 * (w2 + lr2)};
}

/// Inertia tensor of an arm rotated about the body z axis by theta.
inline Mat3 arm_inertia_rotated(const Mat3& J_arm, double theta) {
  const Mat3 rz = rot_z(theta);
  return rz * J_arm * rz.transpose();
}

/// One arm of the robot as mounted: hinge on the hub, rotor at the tip.
struct ArmConfig {
  double mass = 0.4;        // arm structure, kg
  double tip_mass = 0.8;    // motor + propeller, kg
  double length = 0.2786;   // hinge to rotor, m
  double width = 0.03;      // m
  double gamma = 0.0;       // tilt out of the body xy-plane, rad
  double theta = 0.0;       // heading about body z, rad
  Vec3 hinge = Vec3::Zero();  // body frame, m
  bool front = false;
  bool folded = false;

  Vec3 direction() const {
    return {std::cos(theta) * std::cos(gamma), std::sin(theta) * std::cos(gamma), std::sin(gamma)};
  }
  Vec3 tip() const { return hinge + length * direction(); }
};

inline double arm_steering_inertia(const ArmConfig& a) {
  const ArmGeometry g{a.mass, a.length, a.length, a.width, a.gamma};
  const auto pair = arm_inertia(g);
  return a.front ? pair.front : pair.rear;
}

inline Mat3 point_mass_inertia(double m, const Vec3& r) {
  return m * (r.squaredNorm() * Mat3::Identity() - r * r.transpose());
}

/// Full inertia tensor of the body plus arms about the body origin.
inline Mat3 total_inertia_tensor(const Mat3& body, const std::vector<ArmConfig>& arms) {
  Mat3 J = body;
  for (const auto& a : arms) {
    const double js = arm_steering_inertia(a);
    const Mat3 local = Eigen::Vector3d{a.mass * a.width * a.width / 6.0, js, js}.asDiagonal();
    J += arm_inertia_rotated(local, a.theta);
    J += point_mass_inertia(a.mass, a.hinge + 0.5 * a.length * a.direction());
    J += point_mass_inertia(a.tip_mass, a.tip());
  }
  return J;
}

/// Principal-axis diagonal (Jx, Jy, Jz) of body plus arms.
inline Vec3 total_inertia(const Vec3& body_diag, const std::vector<ArmConfig>& arms) {
  return total_inertia_tensor(body_diag.asDiagonal(), arms).diagonal();
}

/// Load on an arm's steering servo, expressed as a tangential force at the
/// rotor hub. `gravity_body` is the gravity vector in body axes.
struct ArmServoLoad {
  double gravity = 0.0;       // N, gravity component in the rotation plane
  double yaw_reaction = 0.0;  // N, rotor drag torque over arm length
  double total() const { return gravity + yaw_reaction; }
};

inline ArmServoLoad arm_servo_load(const ArmConfig& a, int spin_sign, double rotor_speed,
                                   const Vec3& gravity_body, const FlightParams& p) {
  const Vec3 tangent{-std::sin(a.theta), std::cos(a.theta), 0.0};
  ArmServoLoad load;
  load.gravity = (a.mass + a.tip_mass) * gravity_body.dot(tangent);
  load.yaw_reaction = spin_sign * p.c_m * rotor_speed * rotor_speed / a.length;
  return load;
}

}  // namespace landair
