#pragma once

// Landing controllers behind one interface:
//  - FusionController: jerk-limited reference, LQR state feedback with
//    soft output bounds and hard input bounds, ground-effect feedforward.
//  - CascadePidController: position -> velocity -> attitude -> rate cascade
//    with a constant-rate descent, the baseline.
// Ground modes (Static, Transform, Drive) share one chassis routine.

#include <memory>
#include <optional>
#include <string>

#include "landair/jlt_planner.hpp"
#include "landair/lqr.hpp"
#include "landair/mode_fsm.hpp"
#include "landair/sim_engine.hpp"

namespace landair {

// ---------------------------------------------------------------------------
// Linear model

/// x = (P, V, euler, body rates), u = per-rotor thrust (N).
inline VecX flight_model_derivative(const VecX& x, const VecX& thrust, const FlightParams& fp) {
  const EulerAngles e = EulerAngles::from(x.segment<3>(6));
  const Vec3 w = x.segment<3>(9);
  const double sa = fp.l * std::sin(fp.alpha), ca = fp.l * std::cos(fp.alpha);
  const double yaw = fp.c_m / fp.c_omega;
  const Vec3 tau{sa * (-thrust[0] + thrust[1] + thrust[2] - thrust[3]),
                 ca * (thrust[0] + thrust[1] - thrust[2] - thrust[3]),
                 yaw * (thrust[0] - thrust[1] + thrust[2] - thrust[3])};
  const Vec3 eta_dot = euler_rate_transform(e) * w;
  const Vec3 J = fp.inertia_diag();
  VecX dx(12);
  dx.segment<3>(0) = x.segment<3>(3);
  dx.segment<3>(3) = translational_accel(e, x.segment<3>(3), thrust.sum(), fp);
  dx.segment<3>(6) = eta_dot;
  dx.segment<3>(9) = (tau - w.cross(J.cwiseProduct(w)) - aero_friction_torque(eta_dot, fp)).cwiseQuotient(J);
  return dx;
}

struct LinearModel {
  MatX A;
  MatX B;
  VecX G_d;    // response to a common thrust-ratio change
  MatX C_out;  // outputs used for weights and bounds
  VecX x0;
  VecX u0;
  double equilibrium_residual = 0.0;  // nonzero: linearized away from equilibrium

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  bool near_equilibrium() const { return equilibrium_residual < 1e-6; }
};

/// Linearizes f at (x0, u0). G_d is the partial with respect to a uniform
/// thrust multiplier, i.e. B u0.
inline LinearModel linearize(const std::function<VecX(const VecX&, const VecX&)>& f, const VecX& x0,
                             const VecX& u0) {
  const auto J = finite_difference_jacobians(f, x0, u0);
  LinearModel m;
  m.A = J.A;
  m.B = J.B;
  m.G_d = J.B * u0;
  m.C_out = MatX::Identity(x0.size(), x0.size());
  m.x0 = x0;
  m.u0 = u0;
  m.equilibrium_residual = J.residual;
  return m;
}

inline LinearModel linearize_hover(const FlightParams& fp) {
  VecX x0 = VecX::Zero(12);
  VecX u0 = VecX::Constant(4, fp.m * fp.g / 4.0);
  return linearize([&](const VecX& x, const VecX& u) { return flight_model_derivative(x, u, fp); }, x0,
                   u0);
}

// ---------------------------------------------------------------------------
// LQR with slack-softened output bounds

struct LqrWeights {
  VecX Q;      // output weights (diagonal)
  VecX R;      // input weights (diagonal)
  double T_w = 0.0;  // disturbance weight, reported in the cost only
  VecX P_s;    // slack penalty per output
  VecX Y_min, Y_max;
  double G_min = 1.0, G_max = 1.0 / (1.0 - 1.0 / (16.0 * 0.09));  // thrust-ratio range
  double dU_min = -std::numeric_limits<double>::infinity();  // per step, N
  double dU_max = std::numeric_limits<double>::infinity();
  double U_max = std::numeric_limits<double>::infinity();

  void validate(Eigen::Index ny, Eigen::Index m) const {
    if (Q.size() != ny || R.size() != m || P_s.size() != ny || Y_min.size() != ny || Y_max.size() != ny) {
      throw InvalidArgument("LqrWeights: dimension mismatch");
    }
    if ((Q.array() < 0.0).any()) throw InvalidArgument("LqrWeights: Q must be PSD");
    if ((R.array() <= 0.0).any()) throw InvalidArgument("LqrWeights: R must be PD");
    if ((P_s.array() <= 0.0).any()) throw InvalidArgument("LqrWeights: P_s must be PD");
    if ((Y_min.array() > Y_max.array()).any()) throw InvalidArgument("LqrWeights: Y_min > Y_max");
    if (!(dU_min <= 0.0 && dU_max >= 0.0 && U_max > 0.0)) throw InvalidArgument("LqrWeights: bad input bounds");
  }
};

/// Landing weights for the 12-state hover model: z, pitch and pitch rate
/// carry the most weight.
inline LqrWeights default_landing_weights(const FlightParams& fp) {
  LqrWeights w;
  w.Q.resize(12);
  w.Q << 40, 40, 120, 12, 12, 30, 40, 80, 10, 2, 4, 1;
  w.R = VecX::Constant(4, 0.02);
  w.P_s = VecX::Constant(12, 1.0);
  const double inf = std::numeric_limits<double>::infinity();
  w.Y_min = VecX::Constant(12, -inf);
  w.Y_max = VecX::Constant(12, inf);
  // Soft bounds on vertical speed and tilt.
  w.Y_min[5] = -2.5;
  w.Y_max[5] = 2.5;
  for (int k : {6, 7}) {
    w.Y_min[k] = -0.7;
    w.Y_max[k] = 0.7;
  }
  w.U_max = fp.max_rotor_thrust();
  w.dU_max = 8.0;
  w.dU_min = -8.0;
  return w;
}

inline LqrSolution solve_lqr(const LinearModel& mdl, const LqrWeights& w) {
  w.validate(mdl.C_out.rows(), mdl.m());
  const MatX Qx = mdl.C_out.transpose() * w.Q.asDiagonal() * mdl.C_out;
  return solve_care(mdl.A, mdl.B, Qx, MatX(w.R.asDiagonal()));
}

/// Keeps four rotor thrusts inside [0, U_max] by shrinking the yaw pattern
/// first and the roll/pitch patterns second, so the collective and the
/// remaining torques survive saturation. Returns true when anything was shed.
inline bool desaturate_rotor_thrust(VecX& u, double U_max) {
  if (u.size() != 4) return false;
  const Vec4 yaw{1, -1, 1, -1}, roll{-1, 1, 1, -1}, pitch{1, 1, -1, -1};
  Vec4 v = u;
  auto fits = [&](const Vec4& x) { return x.minCoeff() >= 0.0 && x.maxCoeff() <= U_max; };
  if (fits(v)) return false;
  // Largest s in [0, 1] with base + s * delta inside the box, per rotor.
  auto shrink = [&](const Vec4& base, const Vec4& delta) {
    double s = 1.0;
    for (int i = 0; i < 4; ++i) {
      const double x = base[i] + delta[i];
      if (x > U_max && delta[i] > 0.0) s = std::min(s, std::max(0.0, (U_max - base[i]) / delta[i]));
      if (x < 0.0 && delta[i] < 0.0) s = std::min(s, std::max(0.0, -base[i] / delta[i]));
    }
    return base + s * delta;
  };
  const Vec4 d_yaw = v.dot(yaw) / 4.0 * yaw;
  v = shrink(v - d_yaw, d_yaw);
  if (!fits(v)) {
    const Vec4 d_rp = v.dot(roll) / 4.0 * roll + v.dot(pitch) / 4.0 * pitch;
    v = shrink(v - d_rp, d_rp);
  }
  u = v;
  return true;
}

struct ConstrainedControl {
  VecX u;
  bool saturated = false;
  bool rate_limited = false;
  VecX slack;  // output bound violation that was penalized
};

/// u = u_nominal - K dx, with violated output bounds pushed back through
/// P_s, ground-effect ratios divided out, torque patterns shed to fit the
/// thrust box, then rate-limited against u_prev and clamped to [0, U_max].
inline ConstrainedControl constrained_control(const MatX& K, const VecX& dx, const VecX& y,
                                              const LqrWeights& w, const VecX& u_nominal,
                                              const VecX& ge_ratio, const VecX& u_prev,
                                              const MatX& C_pinv) {
  ConstrainedControl out;
  VecX u = u_nominal - K * dx;
  out.slack = VecX::Zero(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] > w.Y_max[i]) out.slack[i] = y[i] - w.Y_max[i];
    if (y[i] < w.Y_min[i]) out.slack[i] = y[i] - w.Y_min[i];
  }
  if (out.slack.any()) u -= K * (C_pinv * w.P_s.cwiseProduct(out.slack));
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (ge_ratio.size() == u.size() && ge_ratio[i] > 0.0) u[i] /= ge_ratio[i];
  }
  out.saturated = desaturate_rotor_thrust(u, w.U_max);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u_prev.size() == u.size()) {
      const double d = clamp(u[i] - u_prev[i], w.dU_min, w.dU_max);
      if (d != u[i] - u_prev[i]) out.rate_limited = true;
      u[i] = u_prev[i] + d;
    }
    const double c = clamp(u[i], 0.0, w.U_max);
    if (c != u[i]) out.saturated = true;
    u[i] = c;
  }
  out.u = u;
  return out;
}

// ---------------------------------------------------------------------------
// PID

struct PidLoop {
  double kp = 0.0, ki = 0.0, kd = 0.0;
  double out_limit = std::numeric_limits<double>::infinity();
  double i_limit = std::numeric_limits<double>::infinity();

  void validate() const {
    if (kp < 0.0 || ki < 0.0 || kd < 0.0) throw InvalidArgument("PidLoop: negative gain");
    if (!(out_limit > 0.0) || !(i_limit >= 0.0)) throw InvalidArgument("PidLoop: bad saturation");
  }
};

/// Single-axis PID with integral clamping. The derivative acts on the
/// supplied error rate when given, otherwise on the error difference.
class Pid {
 public:
  Pid() = default;
  explicit Pid(PidLoop g) : g_(g) { g_.validate(); }

  double update(double err, double dt, std::optional<double> err_rate = std::nullopt) {
    integral_ = clamp(integral_ + err * dt, -g_.i_limit, g_.i_limit);
    double deriv = 0.0;
    if (err_rate) deriv = *err_rate;
    else if (has_prev_ && dt > 0.0) deriv = (err - prev_) / dt;
    prev_ = err;
    has_prev_ = true;
    return clamp(g_.kp * err + g_.ki * integral_ + g_.kd * deriv, -g_.out_limit, g_.out_limit);
  }
  void reset() {
    integral_ = 0.0;
    prev_ = 0.0;
    has_prev_ = false;
  }
  void freeze_integral(double value) { integral_ = value; }
  double integral() const { return integral_; }
  const PidLoop& gains() const { return g_; }

 private:
  PidLoop g_;
  double integral_ = 0.0;
  double prev_ = 0.0;
  bool has_prev_ = false;
};

/// Cascade gains. Outer/inner pairs are critically damped: with an inner
/// loop of bandwidth k, the outer proportional gain is k / 4.
struct PidGains {
  PidLoop pos_xy{0.5, 0.0, 0.0, 2.0};
  PidLoop pos_z{1.0, 0.0, 0.0, 2.0};
  PidLoop vel_xy{2.0, 0.4, 0.0, 4.0, 2.0};
  PidLoop vel_z{4.0, 1.0, 0.0, 6.0, 2.0};
  PidLoop att{5.0, 0.0, 0.0, 3.0};
  PidLoop rate{20.0, 2.0, 0.0, 60.0, 1.0};
  PidLoop wheel_speed{30.0, 5.0, 0.0, 20.0, 2.0};
  PidLoop steering{1.0, 0.0, 0.0, 0.5};
  double max_tilt = 0.5;  // rad
};

struct CascadeReference {
  Vec3 position = Vec3::Zero();
  Vec3 velocity_ff = Vec3::Zero();
  double yaw = 0.0;
};

/// Stateful position -> velocity -> attitude -> rate cascade for flight.
class CascadePid {
 public:
  CascadePid() : CascadePid(PidGains{}) {}
  explicit CascadePid(const PidGains& g)
      : g_(g),
        pos_{Pid(g.pos_xy), Pid(g.pos_xy), Pid(g.pos_z)},
        vel_{Pid(g.vel_xy), Pid(g.vel_xy), Pid(g.vel_z)},
        att_{Pid(g.att), Pid(g.att), Pid(g.att)},
        rate_{Pid(g.rate), Pid(g.rate), Pid(g.rate)} {}

  /// Returns the body wrench request.
  BodyWrench update(const RobotState& s, const CascadeReference& ref, double dt, const FlightParams& fp) {
    Vec3 v_sp;
    for (int k = 0; k < 3; ++k) v_sp[k] = pos_[k].update(ref.position[k] - s.P[k], dt) + ref.velocity_ff[k];
    Vec3 a_sp;
    for (int k = 0; k < 3; ++k) a_sp[k] = vel_[k].update(v_sp[k] - s.V[k], dt);
    const double cy = std::cos(s.eta.psi), sy = std::sin(s.eta.psi);
    const double theta_sp = clamp((a_sp.x() * cy + a_sp.y() * sy) / fp.g, -g_.max_tilt, g_.max_tilt);
    const double phi_sp = clamp((a_sp.x() * sy - a_sp.y() * cy) / fp.g, -g_.max_tilt, g_.max_tilt);
    const double tilt = std::max(0.5, std::cos(s.eta.phi) * std::cos(s.eta.theta));
    BodyWrench wr;
    wr.F = std::max(0.0, fp.m * (fp.g + a_sp.z()) / tilt);
    const Vec3 att_err{phi_sp - s.eta.phi, theta_sp - s.eta.theta, wrap(ref.yaw - s.eta.psi)};
    Vec3 rate_sp;
    for (int k = 0; k < 3; ++k) rate_sp[k] = att_[k].update(att_err[k], dt);
    const Vec3 w = s.omega.vec();
    Vec3 alpha;
    for (int k = 0; k < 3; ++k) alpha[k] = rate_[k].update(rate_sp[k] - w[k], dt);
    const Vec3 tau = fp.inertia_diag().cwiseProduct(alpha);
    wr.Fx = tau.x();
    wr.Fy = tau.y();
    wr.Fz = tau.z();
    return wr;
  }

  void reset() {
    for (auto* group : {&pos_, &vel_, &att_, &rate_}) {
      for (auto& p : *group) p.reset();
    }
  }

  static double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

 private:
  PidGains g_;
  std::array<Pid, 3> pos_, vel_, att_, rate_;
};

/// Flight part of the baseline as a pure function of its integrator state:
/// zero errors give the hover trim wrench.
inline BodyWrench cascade_pid_control(CascadePid& pid, const RobotState& s, const CascadeReference& ref,
                                      double dt, const FlightParams& fp) {
  return pid.update(s, ref, dt, fp);
}

// ---------------------------------------------------------------------------
// Controller interface

struct LandingTarget {
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
  double yaw = 0.0;
  double descent_speed = 0.3;  // terminal vertical speed of the plan, m/s
};

struct DriveCommand {
  double speed = 0.0;  // m/s
  double steer = 0.0;  // rad, bicycle-model angle
};

/// Everything a controller may look at during one control step.
struct ControlContext {
  double t = 0.0;
  double dt = 1e-3;
  Mode mode = Mode::Static;
  double mode_entry_time = 0.0;
  bool mode_changed = false;
  RobotState state;
  const Terrain* terrain = nullptr;
  const RobotParams* params = nullptr;
  Routing routing;
  int wheels_in_contact = 0;
  std::optional<double> first_contact_time;  // any wheel, during the current landing
  std::optional<double> all_contact_time;    // all four wheels
  LandingTarget target;
  DriveCommand drive;
  double takeoff_clearance = 1.0;  // climb target above terrain, m
  double front_fold = 0.0, rear_fold = 0.0;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControlInput update(const ControlContext& ctx) = 0;
  virtual std::string name() const = 0;
  virtual void reset() {}
};

/// Rotor speeds for per-rotor thrusts.
inline RotorSpeeds speeds_from_thrust(const VecX& thrust, const FlightParams& fp) {
  RotorSpeeds w;
  for (int i = 0; i < 4; ++i) {
    w[i] = std::min(fp.omega_max, std::sqrt(std::max(0.0, thrust[i]) / fp.c_omega));
  }
  return w;
}

/// Chassis handling shared by all controllers in the ground modes.
class GroundController {
 public:
  explicit GroundController(PidGains g = {}) : speed_(g.wheel_speed), g_(g) {}

  ControlInput update(const ControlContext& ctx) {
    ControlInput u;
    u.front_fold = ctx.front_fold;
    u.rear_fold = ctx.rear_fold;
    u.brake = ctx.routing.brakes;
    if (!ctx.routing.wheel_drive) {
      speed_.reset();
      return u;
    }
    const Mat3 R = euler_to_rotation(ctx.state.eta);
    const double v_long = R.col(0).dot(ctx.state.V);
    const double torque = speed_.update(ctx.drive.speed - v_long, ctx.dt);
    const double tq = clamp(torque, -ctx.params->geometry.max_drive_torque, ctx.params->geometry.max_drive_torque);
    u.drive_torque.fill(tq);
    if (ctx.routing.steering) {
      const double delta = clamp(ctx.drive.steer, -g_.steering.out_limit, g_.steering.out_limit);
      u.steer = ackermann(delta, ctx.params->chassis);
    }
    return u;
  }
  void reset() { speed_.reset(); }

 private:
  Pid speed_;
  PidGains g_;
};

/// Thrust multiplier (spool-down) after all four wheels touch.
inline double spool_factor(const ControlContext& ctx, double spool_time) {
  if (!ctx.all_contact_time || ctx.mode != Mode::Landing) return 1.0;
  return clamp(1.0 - (ctx.t - *ctx.all_contact_time) / spool_time, 0.0, 1.0);
}

/// CoM height at ground point `xy` at which a body aligned with the local
/// terrain plane touches it with all four wheels.
inline double landing_contact_height(const Terrain& terrain, const RobotParams& p, const Eigen::Vector2d& xy) {
  const double beta = xy.x() >= 0.0 ? terrain.slope() : 0.0;
  return terrain.height(xy.x(), xy.y()) + touch_height(p) / std::cos(beta);
}

/// World acceleration whose thrust direction is normal to the terrain at
/// `xy`: the flat-output terminal acceleration of a slope-aligned landing.
inline Vec3 slope_aligned_acceleration(const Terrain& terrain, const Eigen::Vector2d& xy, double g) {
  const double beta = xy.x() >= 0.0 ? terrain.slope() : 0.0;
  return {-g * std::tan(beta), 0.0, 0.0};
}

// ---------------------------------------------------------------------------
// Proposed controller

struct FusionConfig {
  LqrWeights weights;
  MotionLimits limits;
  PlannerOptions planner;
  double spool_time = 0.4;          // s, thrust ramp after all wheels touch
  double contact_thrust = 0.2;      // thrust fraction reached while only some wheels touch
  double contact_spool_time = 0.2;  // s
  double contact_margin = 0.01;     // m, plan end point below the contact height
  double approach_time = 0.1;       // s, constant-attitude final approach
  double contact_hold_time = 0.05;  // s a lost wheel contact still counts as touching
  bool ground_effect_ff = true;
  bool rate_feedforward = true;
  bool force_observer = true;
  double observer_time_constant = 0.1;  // s
  bool align_to_slope = true;

  static FusionConfig defaults(const RobotParams& p) {
    FusionConfig c;
    c.weights = default_landing_weights(p.flight);
    c.limits.f_min = 0.2 * p.weight();
    c.limits.f_max = 0.9 * 4.0 * p.flight.max_rotor_thrust();
    c.limits.omega_max = 2.0;
    c.limits.v_max = 2.0;
    c.limits.j_max = 20.0;
    c.planner.time_weight = 100.0;
    return c;
  }
};

class FusionController : public Controller {
 public:
  FusionController(const RobotParams& p, FusionConfig cfg)
      : p_(p), cfg_(std::move(cfg)), model_(linearize_hover(p.flight)), ground_() {
    lqr_ = solve_lqr(model_, cfg_.weights);
    C_pinv_ = model_.C_out.completeOrthogonalDecomposition().pseudoInverse();
  }
  explicit FusionController(const RobotParams& p) : FusionController(p, FusionConfig::defaults(p)) {}

  std::string name() const override { return "proposed"; }
  const LinearModel& model() const { return model_; }
  const LqrSolution& lqr() const { return lqr_; }
  const std::optional<Plan3D>& plan() const { return plan_; }

  void reset() override {
    plan_.reset();
    u_prev_.resize(0);
    hold_.reset();
    ground_.reset();
    f_hat_.setZero();
    have_prev_ = false;
    contact_hold_.reset();
    last_contact_.reset();
    first_touch_.reset();
    ref_mode_.reset();
  }

  ControlInput update(const ControlContext& ctx) override {
    if (!ctx.routing.rotors) {
      u_prev_.resize(0);
      plan_.reset();
      return ground_.update(ctx);
    }
    const RobotState& s = ctx.state;
    const FlightParams& fp = p_.flight;
    if (ctx.mode_changed || !ref_mode_ || *ref_mode_ != ctx.mode) on_mode_entry(ctx);

    VecX x_ref = VecX::Zero(12);
    Vec3 acc_ref = Vec3::Zero();
    Vec3 jerk_ref = Vec3::Zero();
    x_ref[8] = ref_yaw_;
    if (plan_) {
      const double tau = ctx.t - plan_start_;
      if (tau <= plan_->T) {
        x_ref.segment<3>(0) = plan_->position(tau);
        x_ref.segment<3>(3) = plan_->velocity(tau);
        acc_ref = plan_->acceleration(tau);
        jerk_ref = plan_->jerk(tau);
      } else {
        // Constant-acceleration approach; if the wheels have not touched by
        // its end, level off and keep descending over the goal.
        const double sa = std::min(tau - plan_->T, approach_.duration);
        const double over = tau - plan_->T - sa;
        const Vec3 v_end = approach_.v0 + approach_.a * approach_.duration;
        x_ref.segment<3>(0) = approach_.p0 + approach_.v0 * sa + 0.5 * approach_.a * sa * sa + v_end * over;
        x_ref.segment<3>(3) = over > 0.0 ? v_end : Vec3(approach_.v0 + approach_.a * sa);
        acc_ref = over > 0.0 ? Vec3::Zero() : approach_.a;
      }
    } else if (hold_) {
      x_ref.segment<3>(0) = *hold_;
    }
    if (ctx.wheels_in_contact > 0) {
      last_contact_ = ctx.t;
      if (!first_touch_) first_touch_ = ctx.t;
    }
    const bool after_touch = ctx.mode == Mode::Landing && first_touch_.has_value();
    const bool touched = after_touch && last_contact_ && ctx.t - *last_contact_ <= cfg_.contact_hold_time;
    update_force_estimate(ctx, after_touch);
    if (after_touch) {
      // After the first touch: keep descending over the touch point. While a
      // wheel is down, hold the attitude normal to the terrain under the body
      // and leave horizontal motion to the braked wheels; after a bounce fly
      // level.
      if (!contact_hold_) contact_hold_ = x_ref.segment<3>(0);
      const double since = ctx.t - *first_touch_;
      x_ref.segment<2>(0) = contact_hold_->head<2>();
      x_ref[2] = contact_hold_->z() - ctx.target.descent_speed * since;
      x_ref.segment<3>(3) = Vec3{0.0, 0.0, -ctx.target.descent_speed};
      jerk_ref.setZero();
      acc_ref = touched && cfg_.align_to_slope ? slope_aligned_acceleration(*ctx.terrain, s.P.head<2>(), fp.g)
                                               : Vec3::Zero();
    }
    // The estimate is frozen while a wheel touches and dropped at full contact.
    if (cfg_.force_observer && !ctx.all_contact_time) acc_ref -= f_hat_ / fp.m;
    // Attitude from the reference acceleration (differential flatness).
    const double cy = std::cos(ref_yaw_), sy = std::sin(ref_yaw_);
    const double gz = fp.g + acc_ref.z();
    const double ax = acc_ref.x() * cy + acc_ref.y() * sy, ay = acc_ref.x() * sy - acc_ref.y() * cy;
    const double jx = jerk_ref.x() * cy + jerk_ref.y() * sy, jy = jerk_ref.x() * sy - jerk_ref.y() * cy;
    x_ref[7] = std::atan2(ax, gz);
    x_ref[6] = std::atan2(ay, gz);
    if (cfg_.rate_feedforward) {
      x_ref[10] = (jx * gz - ax * jerk_ref.z()) / (gz * gz + ax * ax);
      x_ref[9] = (jy * gz - ay * jerk_ref.z()) / (gz * gz + ay * ay);
    }

    VecX x(12);
    x << s.P, s.V, s.eta.vec(), s.omega.vec();
    VecX dx = x - x_ref;
    dx[8] = CascadePid::wrap(dx[8]);
    if (touched && ctx.wheels_in_contact == 4) dx[0] = dx[1] = dx[3] = dx[4] = 0.0;
    const double f_total = fp.m * (acc_ref + Vec3{0.0, 0.0, fp.g}).norm();
    const VecX u_nom = VecX::Constant(4, f_total / 4.0);

    VecX ratio = VecX::Ones(4);
    if (cfg_.ground_effect_ff) ratio = predicted_ratio(s, ctx, u_nom);
    auto cc = constrained_control(lqr_.K, dx, model_.C_out * x, cfg_.weights, u_nom, ratio, u_prev_, C_pinv_);
    u_prev_ = cc.u;
    double spool = spool_factor(ctx, cfg_.spool_time);
    if (touched) {
      const double ramp = clamp((ctx.t - *first_touch_) / cfg_.contact_spool_time, 0.0, 1.0);
      spool *= 1.0 - (1.0 - cfg_.contact_thrust) * ramp;
    }
    ControlInput u;
    u.rotors = speeds_from_thrust(cc.u * spool, fp);
    thrust_prev_ = 0.0;
    const VecX applied = (cc.u * spool).cwiseMin(fp.max_rotor_thrust()).cwiseMax(0.0);
    for (int i = 0; i < 4; ++i) thrust_prev_ += applied[i] * ratio[i];
    u.brake = ctx.routing.brakes;
    u.front_fold = ctx.front_fold;
    u.rear_fold = ctx.rear_fold;
    return u;
  }

 private:
  void on_mode_entry(const ControlContext& ctx) {
    ref_mode_ = ctx.mode;
    const RobotState& s = ctx.state;
    switch (ctx.mode) {
      case Mode::Takeoff: {
        ref_yaw_ = s.eta.psi;
        const double z_goal = ctx.terrain->height(s.P.x(), s.P.y()) + touch_height(p_) + ctx.takeoff_clearance;
        make_plan(ctx, Vec3{s.P.x(), s.P.y(), z_goal}, 0.0, Vec3::Zero());
        break;
      }
      case Mode::TrajectoryPlanning: {
        ref_yaw_ = ctx.target.yaw;
        const double z_goal = landing_contact_height(*ctx.terrain, p_, ctx.target.xy) - cfg_.contact_margin;
        const Vec3 a_end = cfg_.align_to_slope ? slope_aligned_acceleration(*ctx.terrain, ctx.target.xy, p_.flight.g)
                                               : Vec3::Zero();
        make_plan(ctx, Vec3{ctx.target.xy.x(), ctx.target.xy.y(), z_goal}, -ctx.target.descent_speed, a_end,
                  cfg_.approach_time);
        contact_hold_.reset();
        break;
      }
      case Mode::Landing:
        if (!plan_) {
          ref_yaw_ = s.eta.psi;
          const double z_goal = landing_contact_height(*ctx.terrain, p_, s.P.head<2>()) - cfg_.contact_margin;
          const Vec3 a_end = cfg_.align_to_slope ? slope_aligned_acceleration(*ctx.terrain, s.P.head<2>(), p_.flight.g)
                                                 : Vec3::Zero();
          make_plan(ctx, Vec3{s.P.x(), s.P.y(), z_goal}, -ctx.target.descent_speed, a_end, cfg_.approach_time);
        }
        contact_hold_.reset();
        last_contact_.reset();
        first_touch_.reset();
        break;
      case Mode::Flying:
      case Mode::Hovering:
        if (ctx.mode == Mode::Hovering || !plan_) {
          plan_.reset();
          hold_ = s.P;
          ref_yaw_ = s.eta.psi;
        }
        break;
      default: break;
    }
  }

  /// Plans to `goal`, reached with vertical speed `vz_end` after a final
  /// approach of `approach` seconds at constant acceleration `a_end`.
  void make_plan(const ControlContext& ctx, const Vec3& goal, double vz_end, const Vec3& a_end,
                 double approach = 0.0) {
    const RobotState& s = ctx.state;
    const Vec3 v_end{0.0, 0.0, vz_end};
    approach_.duration = approach;
    approach_.a = a_end;
    approach_.v0 = v_end - a_end * approach;
    approach_.p0 = goal - approach_.v0 * approach - 0.5 * a_end * approach * approach;
    std::array<AxisBoundary, 3> b;
    for (int k = 0; k < 3; ++k) {
      b[k].p0 = s.P[k];
      b[k].v0 = s.V[k];
      b[k].pT = approach_.p0[k];
      b[k].vT = approach_.v0[k];
      b[k].aT = a_end[k];
    }
    plan_ = plan_3d_feasible(b, cfg_.limits, p_.flight.m, cfg_.planner);
    plan_start_ = ctx.t;
    hold_.reset();
  }

  /// First-order estimate of the external world-frame force from the
  /// mismatch between measured and modelled acceleration. Frozen once a
  /// wheel touches.
  void update_force_estimate(const ControlContext& ctx, bool touched) {
    const RobotState& s = ctx.state;
    if (touched || ctx.wheels_in_contact > 0) {
      have_prev_ = false;
      return;
    }
    if (have_prev_ && ctx.dt > 0.0) {
      const FlightParams& fp = p_.flight;
      const Vec3 a_meas = (s.V - v_prev_) / ctx.dt;
      const Vec3 a_model = R_prev_.col(2) * thrust_prev_ / fp.m - Vec3{0.0, 0.0, fp.g};
      const double alpha = ctx.dt / (cfg_.observer_time_constant + ctx.dt);
      f_hat_ += alpha * (fp.m * (a_meas - a_model) - f_hat_);
    }
    v_prev_ = s.V;
    R_prev_ = euler_to_rotation(s.eta);
    have_prev_ = true;
  }

  VecX predicted_ratio(const RobotState& s, const ControlContext& ctx, const VecX& u) const {
    VecX r = VecX::Ones(4);
    const Mat3 R = euler_to_rotation(s.eta);
    const double v = std::hypot(s.V.x(), s.V.y());
    for (int i = 0; i < 4; ++i) {
      const Vec3 hub = s.P + R * p_.rotor_hub_body(i);
      const double h = hub.z() - ctx.terrain->height(hub.x(), hub.y());
      r[i] = thrust_ratio(h, v, induced_velocity(std::max(0.0, u[i]), p_.ground), p_.ground).ratio;
    }
    return r;
  }

  RobotParams p_;
  FusionConfig cfg_;
  LinearModel model_;
  LqrSolution lqr_;
  MatX C_pinv_;
  GroundController ground_;
  std::optional<Plan3D> plan_;
  double plan_start_ = 0.0;
  Vec3 f_hat_ = Vec3::Zero();
  Vec3 v_prev_ = Vec3::Zero();
  Mat3 R_prev_ = Mat3::Identity();
  double thrust_prev_ = 0.0;
  bool have_prev_ = false;
  struct Approach {
    Vec3 p0 = Vec3::Zero(), v0 = Vec3::Zero(), a = Vec3::Zero();
    double duration = 0.0;
  } approach_;
  std::optional<Vec3> hold_;
  std::optional<Vec3> contact_hold_;
  std::optional<double> last_contact_;
  std::optional<double> first_touch_;
  std::optional<Mode> ref_mode_;
  double ref_yaw_ = 0.0;
  VecX u_prev_;
};

// ---------------------------------------------------------------------------
// Baseline controller

struct PidControllerConfig {
  PidGains gains;
  double descent_rate = 0.7;  // m/s, constant-rate landing descent
  double climb_rate = 0.7;    // m/s
  double spool_time = 0.4;    // s
};

class CascadePidController : public Controller {
 public:
  CascadePidController(const RobotParams& p, PidControllerConfig cfg = {})
      : p_(p), cfg_(cfg), pid_(cfg.gains), ground_(cfg.gains) {}

  std::string name() const override { return "pid-baseline"; }

  void reset() override {
    pid_.reset();
    ground_.reset();
    ref_mode_.reset();
  }

  ControlInput update(const ControlContext& ctx) override {
    if (!ctx.routing.rotors) {
      pid_.reset();
      ref_mode_.reset();
      return ground_.update(ctx);
    }
    const RobotState& s = ctx.state;
    if (ctx.mode_changed || !ref_mode_ || *ref_mode_ != ctx.mode) on_mode_entry(ctx);
    CascadeReference ref;
    ref.yaw = yaw_;
    ref.position = anchor_;
    const double since = ctx.t - ramp_start_;
    switch (ctx.mode) {
      case Mode::Takeoff:
        ref.position.z() = std::min(anchor_.z() + cfg_.climb_rate * since, climb_goal_);
        ref.velocity_ff.z() = ref.position.z() < climb_goal_ ? cfg_.climb_rate : 0.0;
        break;
      case Mode::TrajectoryPlanning:
      case Mode::Landing:
        ref.position.z() = anchor_.z() - cfg_.descent_rate * since;
        ref.velocity_ff.z() = -cfg_.descent_rate;
        break;
      default: break;
    }
    const BodyWrench wr = cascade_pid_control(pid_, s, ref, ctx.dt, p_.flight);
    auto alloc = mixer_allocate(wr, p_.flight);
    const double spool = spool_factor(ctx, cfg_.spool_time);
    ControlInput u;
    for (int i = 0; i < 4; ++i) u.rotors[i] = alloc.speeds[i] * std::sqrt(spool);
    u.brake = ctx.routing.brakes;
    u.front_fold = ctx.front_fold;
    u.rear_fold = ctx.rear_fold;
    return u;
  }

 private:
  void on_mode_entry(const ControlContext& ctx) {
    const Mode prev = ref_mode_.value_or(Mode::Static);
    ref_mode_ = ctx.mode;
    const RobotState& s = ctx.state;
    switch (ctx.mode) {
      case Mode::Takeoff:
        anchor_ = s.P;
        yaw_ = s.eta.psi;
        climb_goal_ = ctx.terrain->height(s.P.x(), s.P.y()) + touch_height(p_) + ctx.takeoff_clearance;
        ramp_start_ = ctx.t;
        break;
      case Mode::TrajectoryPlanning:
        anchor_ = Vec3{ctx.target.xy.x(), ctx.target.xy.y(), s.P.z()};
        yaw_ = ctx.target.yaw;
        ramp_start_ = ctx.t;
        break;
      case Mode::Landing:
        if (prev != Mode::TrajectoryPlanning) {
          anchor_ = s.P;
          yaw_ = s.eta.psi;
          ramp_start_ = ctx.t;
        }
        break;
      case Mode::Flying:
      case Mode::Hovering:
        if (prev == Mode::Takeoff) anchor_.z() = climb_goal_;
        else if (prev != Mode::Flying) anchor_ = s.P;
        if (prev != Mode::Takeoff && prev != Mode::Flying) yaw_ = s.eta.psi;
        break;
      default: break;
    }
  }

  RobotParams p_;
  PidControllerConfig cfg_;
  CascadePid pid_;
  GroundController ground_;
  std::optional<Mode> ref_mode_;
  Vec3 anchor_ = Vec3::Zero();
  double yaw_ = 0.0;
  double ramp_start_ = 0.0;
  double climb_goal_ = 0.0;
};

}  // namespace landair
