#pragma once

// Fixed-step RK4 integration of the coupled flight/suspension/tire model
// over ramp terrain, with penalty wheel contact and seeded disturbances.
//
// State layout (20 entries): position P (world), velocity V (world), Euler
// angles, body rates, then per corner the suspension stroke s (compression
// from full droop, m) followed by the four stroke rates. Corners are in
// chassis order fl, fr, rl, rr.

#include <array>
#include <optional>
#include <random>
#include <string>

#include "landair/params.hpp"

namespace landair {

// ---------------------------------------------------------------------------
// Terrain

struct SurfaceQuery {
  double distance = 0.0;  // signed distance above the surface, m
  Vec3 normal = Vec3::UnitZ();
};

/// Flat ground for x < 0 joined to an upward ramp for x >= 0.
class Terrain {
 public:
  explicit Terrain(double slope = 0.0, double reference_height = 0.0)
      : slope_(slope), h0_(reference_height) {
    if (!(slope >= 0.0 && slope <= deg2rad(35.0) + 1e-12)) {
      throw InvalidArgument("Terrain: slope must be within [0, 35] degrees");
    }
  }

  double slope() const { return slope_; }
  double reference_height() const { return h0_; }

  double height(double x, double /*y*/ = 0.0) const {
    return x >= 0.0 ? h0_ + std::tan(slope_) * x : h0_;
  }
  Vec3 normal(double x, double /*y*/ = 0.0) const {
    return x >= 0.0 ? ramp_normal() : Vec3::UnitZ();
  }
  Vec3 ramp_normal() const { return {-std::sin(slope_), 0.0, std::cos(slope_)}; }

  /// Distance to the nearer of the two half-planes.
  SurfaceQuery query(const Vec3& p) const {
    const Vec3 rel{p.x(), p.y(), p.z() - h0_};
    if (slope_ == 0.0) return {rel.z(), Vec3::UnitZ()};
    // Flat half-plane x < 0.
    SurfaceQuery flat;
    if (rel.x() <= 0.0) {
      flat = {rel.z(), Vec3::UnitZ()};
    } else {
      const Eigen::Vector2d d{rel.x(), rel.z()};
      flat = {edge_distance(d, rel.z()), edge_normal(d)};
    }
    // Ramp half-plane: along-slope coordinate u >= 0.
    const Vec3 n = ramp_normal();
    const Vec3 t{std::cos(slope_), 0.0, std::sin(slope_)};
    const double u = rel.dot(t);
    SurfaceQuery ramp;
    if (u >= 0.0) {
      ramp = {rel.dot(n), n};
    } else {
      const Eigen::Vector2d d{rel.x(), rel.z()};
      ramp = {edge_distance(d, rel.dot(n)), edge_normal(d)};
    }
    return ramp.distance < flat.distance ? ramp : flat;
  }

 private:
  static double edge_distance(const Eigen::Vector2d& d, double side) {
    return side >= 0.0 ? d.norm() : -d.norm();
  }
  static Vec3 edge_normal(const Eigen::Vector2d& d) {
    const double n = d.norm();
    return n > 1e-12 ? Vec3{d.x() / n, 0.0, d.y() / n} : Vec3::UnitZ();
  }

  double slope_;
  double h0_;
};

// ---------------------------------------------------------------------------
// Disturbances

enum class DisturbanceClass { None, Uniform0to40, Fixed60, Fixed80 };

inline std::string to_string(DisturbanceClass c) {
  switch (c) {
    case DisturbanceClass::None: return "none";
    case DisturbanceClass::Uniform0to40: return "0-40";
    case DisturbanceClass::Fixed60: return "60";
    case DisturbanceClass::Fixed80: return "80";
  }
  return "none";
}

inline DisturbanceClass parse_disturbance_class(const std::string& s) {
  if (s == "none" || s == "0") return DisturbanceClass::None;
  if (s == "0-40") return DisturbanceClass::Uniform0to40;
  if (s == "60") return DisturbanceClass::Fixed60;
  if (s == "80") return DisturbanceClass::Fixed80;
  throw ConfigError("unknown disturbance class '" + s + "' (expected none, 0-40, 60 or 80)");
}

struct DisturbanceSpec {
  DisturbanceClass cls = DisturbanceClass::None;
  double hold = 0.5;  // s
  std::uint64_t seed = 0;
};

/// Piecewise-constant random force: a new magnitude and direction every
/// `hold` seconds. The value in each interval depends only on the seed and
/// the interval index.
class DisturbanceGenerator {
 public:
  explicit DisturbanceGenerator(DisturbanceSpec spec) : spec_(spec) {
    if (!(spec_.hold > 0.0)) throw InvalidArgument("DisturbanceGenerator: hold must be > 0");
  }

  Vec3 force(double t) const {
    if (spec_.cls == DisturbanceClass::None || t < 0.0) return Vec3::Zero();
    const auto k = static_cast<std::uint64_t>(std::floor(t / spec_.hold + 1e-9));
    std::seed_seq seq{static_cast<std::uint32_t>(spec_.seed), static_cast<std::uint32_t>(spec_.seed >> 32),
                      static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 dir;
    do {
      dir = {normal(rng), normal(rng), normal(rng)};
    } while (dir.norm() < 1e-9);
    dir.normalize();
    double mag = 0.0;
    switch (spec_.cls) {
      case DisturbanceClass::Uniform0to40:
        mag = std::uniform_real_distribution<double>(0.0, 40.0)(rng);
        break;
      case DisturbanceClass::Fixed60: mag = 60.0; break;
      case DisturbanceClass::Fixed80: mag = 80.0; break;
      case DisturbanceClass::None: break;
    }
    return mag * dir;
  }

  const DisturbanceSpec& spec() const { return spec_; }

 private:
  DisturbanceSpec spec_;
};

// ---------------------------------------------------------------------------
// State, input, configuration

struct SimConfig {
  double dt = 1e-3;
  double duration = 10.0;
  double contact_k = 150000.0;  // N/m, tire stiffness
  double contact_b = 150.0;     // N s/m
  std::uint64_t seed = 0;

  void validate() const {
    if (!(dt >= 1e-4 - 1e-15 && dt <= 5e-3 + 1e-15)) {
      throw InvalidArgument("SimConfig: dt must be within [1e-4, 5e-3] s");
    }
    if (!(duration >= 0.0)) throw InvalidArgument("SimConfig: negative duration");
  }
};

using StateVec = Eigen::Matrix<double, 20, 1>;

struct RobotState {
  Vec3 P = Vec3::Zero();
  Vec3 V = Vec3::Zero();
  EulerAngles eta;
  BodyRates omega;
  std::array<double, 4> stroke{0, 0, 0, 0};
  std::array<double, 4> stroke_rate{0, 0, 0, 0};

  StateVec vec() const {
    StateVec x;
    x.segment<3>(0) = P;
    x.segment<3>(3) = V;
    x.segment<3>(6) = eta.vec();
    x.segment<3>(9) = omega.vec();
    for (int i = 0; i < 4; ++i) {
      x[12 + i] = stroke[i];
      x[16 + i] = stroke_rate[i];
    }
    return x;
  }
  static RobotState from(const StateVec& x) {
    RobotState s;
    s.P = x.segment<3>(0);
    s.V = x.segment<3>(3);
    s.eta = EulerAngles::from(x.segment<3>(6));
    s.omega = BodyRates::from(x.segment<3>(9));
    for (int i = 0; i < 4; ++i) {
      s.stroke[i] = x[12 + i];
      s.stroke_rate[i] = x[16 + i];
    }
    return s;
  }
};

struct ControlInput {
  RotorSpeeds rotors;
  std::array<double, 4> drive_torque{0, 0, 0, 0};  // per wheel, N m
  std::array<double, 4> steer{0, 0, 0, 0};         // per wheel, rad
  bool brake = false;
  double U4 = 0.0;          // chassis yaw moment while on the ground, N m
  double front_fold = 0.0;  // arm servo targets, 0 deployed .. 1 folded
  double rear_fold = 0.0;
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged(const std::string& what, RobotState last_valid, double t)
      : Error(what), last_(last_valid), t_(t) {}
  const RobotState& last_valid_state() const { return last_; }
  double time() const { return t_; }

 private:
  RobotState last_;
  double t_;
};

// ---------------------------------------------------------------------------
// Wheel contact

struct WheelContact {
  bool in_contact = false;
  double normal_force = 0.0;  // N along the terrain normal
  double penetration = 0.0;   // m
  double clearance = 0.0;     // wheel-to-terrain gap, m (negative when pressed in)
  double long_speed = 0.0;    // m/s along the wheel heading
  double Fx = 0.0;            // N, longitudinal (wheel frame)
  double Fy = 0.0;            // N, lateral (wheel frame)
  Vec3 force = Vec3::Zero();  // world frame, on the wheel
};

/// Penalty contact at a wheel with centre `center` moving at `velocity`.
inline WheelContact wheel_contact_force(const Vec3& center, const Vec3& velocity, const Vec3& heading,
                                        double steer, double drive_torque, bool brake,
                                        const Terrain& terrain, const RobotParams& p,
                                        const SimConfig& cfg) {
  WheelContact c;
  const auto q = terrain.query(center);
  const double rw = p.chassis.wheel_radius;
  c.clearance = q.distance - rw;
  const Vec3& n = q.normal;
  Vec3 tl = heading - heading.dot(n) * n;
  if (tl.norm() < 1e-9) tl = n.cross(Vec3::UnitY());
  tl.normalize();
  if (steer != 0.0) tl = std::cos(steer) * tl + std::sin(steer) * n.cross(tl);
  const Vec3 tq = n.cross(tl);
  c.long_speed = velocity.dot(tl);

  const double pen = -c.clearance;
  if (pen <= 0.0) return c;
  const double pen_rate = -velocity.dot(n);
  const double N = std::max(0.0, cfg.contact_k * pen + cfg.contact_b * pen_rate);
  c.penetration = pen;
  if (N <= 0.0) return c;
  c.in_contact = true;
  c.normal_force = N;
  const double vq = velocity.dot(tq);
  const double alpha = slip_angle(c.long_speed, vq, p.chassis.v_eps);
  const double fy = -tire_lateral_force(alpha, N, p.tire);
  const double fx = brake ? -p.geometry.c_brake * c.long_speed : drive_torque / rw;
  std::tie(c.Fx, c.Fy) = friction_ellipse_clamp(fx, fy, N, p.tire.mu);
  c.force = N * n + c.Fx * tl + c.Fy * tq;
  return c;
}

// ---------------------------------------------------------------------------
// Derivative

struct Diagnostics {
  std::array<WheelContact, 4> wheels;
  std::array<double, 4> rotor_thrust{};  // effective, N
  std::array<double, 4> rotor_ratio{};   // ground-effect multiplier
  std::array<double, 4> rotor_height{};  // hub above terrain, m
  std::array<double, 4> strut_force{};   // N
  Vec3 contact_force = Vec3::Zero();     // world, sum over wheels
  Vec3 thrust_world = Vec3::Zero();

  int contacts() const {
    int n = 0;
    for (const auto& w : wheels) n += w.in_contact ? 1 : 0;
    return n;
  }
  double min_clearance() const {
    double c = wheels[0].clearance;
    for (const auto& w : wheels) c = std::min(c, w.clearance);
    return c;
  }
};

inline double strut_force(double s, double sdot, const RobotParams& p) {
  double f = p.suspension.K1 * s + p.suspension.B1 * sdot;
  if (s < 0.0) f += p.geometry.k_stop * s;
  if (s > p.geometry.stroke_max) f += p.geometry.k_stop * (s - p.geometry.stroke_max);
  return f;
}

inline StateVec derivative(const StateVec& x, const ControlInput& u, const Vec3& disturbance,
                           const Terrain& terrain, const RobotParams& p, const SimConfig& cfg,
                           Diagnostics* diag = nullptr) {
  const auto s = RobotState::from(x);
  const FlightParams& fp = p.flight;
  const Mat3 R = euler_to_rotation(s.eta);
  const Mat3 W = euler_rate_transform(s.eta);
  const Vec3 bx = R.col(0), bz = R.col(2);
  const Vec3 w = s.omega.vec();
  const Vec3 gvec{0.0, 0.0, -fp.g};
  const double m_u = p.suspension.m_u;
  const double m_s = p.sprung_mass();

  Diagnostics local;
  Diagnostics& d = diag ? *diag : local;

  // Rotors with per-hub ground effect.
  const double v_horizontal = std::hypot(s.V.x(), s.V.y());
  const auto xy = rotor_positions_xy(fp);
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();
  for (int i = 0; i < 4; ++i) {
    const double cmd = fp.c_omega * u.rotors[i] * u.rotors[i];
    const Vec3 hub = s.P + R * p.rotor_hub_body(i);
    const double h = hub.z() - terrain.height(hub.x(), hub.y());
    double ratio = 1.0;
    if (cmd > 0.0) ratio = thrust_ratio(h, v_horizontal, induced_velocity(cmd, p.ground), p.ground).ratio;
    const double T = cmd * ratio;
    d.rotor_thrust[i] = T;
    d.rotor_ratio[i] = ratio;
    d.rotor_height[i] = h;
    thrust += T;
    torque.x() += xy[i].y() * T;
    torque.y() += -xy[i].x() * T;
    torque.z() += (i % 2 == 0 ? 1.0 : -1.0) * fp.c_m * u.rotors[i] * u.rotors[i];
  }
  d.thrust_world = thrust * bz;

  const Vec3 eta_dot = W * w;
  const Vec3 M_g = gyroscopic_torque(s.omega, u.rotors, fp);
  const Vec3 M_d = aero_friction_torque(eta_dot, fp);

  // Wheels are point masses sliding along the body z axis. Generalized
  // velocities nu = (V world, omega body, stroke rates); Kane's equations
  // M(q) nu' = Q - bias.
  using Mat10 = Eigen::Matrix<double, 10, 10>;
  using Vec10 = Eigen::Matrix<double, 10, 1>;
  const Vec3 J = fp.inertia_diag();
  Mat10 M = Mat10::Zero();
  Vec10 Q = Vec10::Zero();
  M.topLeftCorner<3, 3>() = m_s * Mat3::Identity();
  M.block<3, 3>(3, 3) = J.asDiagonal();
  Q.head<3>() = d.thrust_world - Vec3{fp.d_x, fp.d_y, fp.d_z}.cwiseProduct(s.V) + disturbance + m_s * gvec;
  Q.segment<3>(3) = torque - w.cross(J.cwiseProduct(w)) - M_g - M_d;
  d.contact_force.setZero();
  bool any_contact = false;
  for (int i = 0; i < 4; ++i) {
    const Vec3 r = p.wheel_center_body(i, s.stroke[i]);
    const Vec3 center = s.P + R * r;
    const Vec3 vel = s.V + R * w.cross(r) + bz * s.stroke_rate[i];
    d.wheels[i] = wheel_contact_force(center, vel, bx, u.steer[i], u.drive_torque[i], u.brake, terrain, p, cfg);
    any_contact = any_contact || d.wheels[i].in_contact;
    d.contact_force += d.wheels[i].force;
    d.strut_force[i] = strut_force(s.stroke[i], s.stroke_rate[i], p);

    Eigen::Matrix<double, 3, 10> Ji = Eigen::Matrix<double, 3, 10>::Zero();
    Ji.leftCols<3>().setIdentity();
    Mat3 r_hat;
    r_hat << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
    Ji.block<3, 3>(0, 3) = -R * r_hat;
    Ji.col(6 + i) = bz;
    const Vec3 bias = R * (w.cross(w.cross(r)) + 2.0 * w.cross(Vec3::UnitZ() * s.stroke_rate[i]));
    M += m_u * Ji.transpose() * Ji;
    Q += Ji.transpose() * (d.wheels[i].force + m_u * gvec - m_u * bias);
    Q[6 + i] -= d.strut_force[i];
  }
  if (any_contact) Q[5] += u.U4;
  const Vec10 acc = M.ldlt().solve(Q);

  StateVec dx;
  dx.segment<3>(0) = s.V;
  dx.segment<3>(3) = acc.head<3>();
  dx.segment<3>(6) = eta_dot;
  dx.segment<3>(9) = acc.segment<3>(3);
  for (int i = 0; i < 4; ++i) {
    dx[12 + i] = s.stroke_rate[i];
    dx[16 + i] = acc[6 + i];
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Integration

struct StepInfo {
  Vec3 contact_impulse = Vec3::Zero();  // RK4-weighted contact force times dt
  Diagnostics at_start;                 // diagnostics of the first stage
};

inline RobotState rk4_step(const RobotState& state, const ControlInput& u, const Vec3& disturbance,
                           const Terrain& terrain, const RobotParams& p, const SimConfig& cfg,
                           double t = 0.0, StepInfo* info = nullptr) {
  const double h = cfg.dt;
  const StateVec x = state.vec();
  Diagnostics d1, d2, d3, d4;
  StateVec k1, k2, k3, k4;
  try {
    k1 = derivative(x, u, disturbance, terrain, p, cfg, &d1);
    k2 = derivative(x + 0.5 * h * k1, u, disturbance, terrain, p, cfg, &d2);
    k3 = derivative(x + 0.5 * h * k2, u, disturbance, terrain, p, cfg, &d3);
    k4 = derivative(x + h * k3, u, disturbance, terrain, p, cfg, &d4);
  } catch (const Error& e) {
    throw SimulationDiverged(std::string("simulation diverged: ") + e.what(), state, t);
  }
  const StateVec xn = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!xn.allFinite() || xn.segment<3>(0).norm() > 1e4 ||
      std::abs(xn[7]) >= kPi / 2.0 - kGimbalMargin) {
    throw SimulationDiverged("simulation diverged: non-finite or runaway state", state, t);
  }
  if (info) {
    info->contact_impulse =
        h / 6.0 * (d1.contact_force + 2.0 * d2.contact_force + 2.0 * d3.contact_force + d4.contact_force);
    info->at_start = d1;
  }
  return RobotState::from(xn);
}

/// Contact and rotor diagnostics of a state without advancing it.
inline Diagnostics diagnose(const RobotState& s, const ControlInput& u, const Terrain& terrain,
                            const RobotParams& p, const SimConfig& cfg) {
  Diagnostics d;
  derivative(s.vec(), u, Vec3::Zero(), terrain, p, cfg, &d);
  return d;
}

// ---------------------------------------------------------------------------
// Bookkeeping helpers

/// World velocity of a wheel centre.
inline Vec3 wheel_velocity(const RobotState& s, const RobotParams& p, int i) {
  const Mat3 R = euler_to_rotation(s.eta);
  return s.V + R * (s.omega.vec().cross(p.wheel_center_body(i, s.stroke[i])) + Vec3::UnitZ() * s.stroke_rate[i]);
}

/// Linear momentum of body plus unsprung masses.
inline Vec3 total_momentum(const RobotState& s, const RobotParams& p) {
  Vec3 m = p.sprung_mass() * s.V;
  for (int i = 0; i < 4; ++i) m += p.suspension.m_u * wheel_velocity(s, p, i);
  return m;
}

/// Kinetic + gravitational + elastic (strut, stops, tire) energy.
inline double mechanical_energy(const RobotState& s, const Terrain& terrain, const RobotParams& p,
                                const SimConfig& cfg) {
  const Mat3 R = euler_to_rotation(s.eta);
  const double g = p.flight.g, m_u = p.suspension.m_u, m_s = p.sprung_mass();
  const Vec3 J = p.flight.inertia_diag();
  const Vec3 w = s.omega.vec();
  double E = 0.5 * m_s * s.V.squaredNorm() + 0.5 * w.dot(J.cwiseProduct(w)) + m_s * g * s.P.z();
  for (int i = 0; i < 4; ++i) {
    const Vec3 c = s.P + R * p.wheel_center_body(i, s.stroke[i]);
    E += 0.5 * m_u * wheel_velocity(s, p, i).squaredNorm() + m_u * g * c.z();
    const double st = s.stroke[i];
    E += 0.5 * p.suspension.K1 * st * st;
    if (st < 0.0) E += 0.5 * p.geometry.k_stop * st * st;
    if (st > p.geometry.stroke_max) {
      E += 0.5 * p.geometry.k_stop * (st - p.geometry.stroke_max) * (st - p.geometry.stroke_max);
    }
    const double pen = p.chassis.wheel_radius - terrain.query(c).distance;
    if (pen > 0.0) E += 0.5 * cfg.contact_k * pen * pen;
  }
  return E;
}

/// Wheel stroke at which a hanging wheel is in equilibrium (droop stop).
inline double hanging_stroke(const RobotParams& p) {
  return -p.suspension.m_u * p.flight.g / (p.suspension.K1 + p.geometry.k_stop);
}

inline double hover_rotor_speed(const RobotParams& p) {
  return std::sqrt(p.total_mass() * p.flight.g / (4.0 * p.flight.c_omega));
}

/// Level hover at `position` with wheels hanging.
inline RobotState hover_state(const Vec3& position, const RobotParams& p, double yaw = 0.0) {
  RobotState s;
  s.P = position;
  s.eta.psi = yaw;
  s.stroke.fill(hanging_stroke(p));
  return s;
}

/// Height of the CoM above the ground when the lowest wheel just touches a
/// flat surface with the body level and wheels hanging.
inline double touch_height(const RobotParams& p) {
  return -(p.geometry.wheel_droop_z + hanging_stroke(p)) + p.chassis.wheel_radius;
}

/// Approximate rest pose on the terrain at (x, y): body aligned with the
/// surface, struts at their static compression.
inline RobotState rest_state(double x, double y, const Terrain& terrain, const RobotParams& p,
                             const SimConfig& cfg = {}) {
  const double beta = x >= 0.0 ? terrain.slope() : 0.0;
  const double g_n = p.flight.g * std::cos(beta);
  const double strut = p.sprung_mass() * g_n / 4.0;
  const double s0 = strut / p.suspension.K1;
  const double tire = p.total_mass() * g_n / 4.0 / cfg.contact_k;
  const double ride = -(p.geometry.wheel_droop_z + s0) + p.chassis.wheel_radius - tire;
  RobotState s;
  const Vec3 n = terrain.normal(x);
  const Vec3 base{x, y, terrain.height(x, y)};
  s.P = base + ride * n;
  s.eta.theta = -beta;
  s.stroke.fill(s0);
  return s;
}

}  // namespace landair
