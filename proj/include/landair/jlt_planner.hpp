#pragma once

// Jerk-limited trajectory generation for a per-axis triple integrator.
//
// Each axis minimizes the time-normalized jerk cost (1/T) * integral(j^2)
// subject to terminal state equality and box limits on velocity and jerk.
// Unconstrained problems have the closed-form quintic as their solution.
// When a limit is active at a fixed duration the axis is re-solved as a QP
// over piecewise-constant jerk; free-duration problems pick T by
// golden-section search and extend it by bisection until the quintic is
// feasible.

#include <algorithm>
#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "landair/qp_solver.hpp"

namespace landair {

struct AxisBoundary {
  double p0 = 0.0, v0 = 0.0, a0 = 0.0;
  double pT = 0.0, vT = 0.0, aT = 0.0;
  std::optional<double> T;  // free when absent
};

struct MotionLimits {
  double f_min = 20.0;     // N
  double f_max = 600.0;    // N
  double omega_max = 3.0;  // rad/s
  double v_max = 2.0;      // m/s
  double j_max = 20.0;     // m/s^3
};

struct PlannerOptions {
  double time_weight = 100.0;  // penalty on duration for free-T problems
  double T_min = 0.05;
  double T_max = 60.0;
  int qp_segments = 200;
};

/// Polynomial p(tau) = sum c[k] tau^k on [t0, t0 + duration].
struct PolySegment {
  double t0 = 0.0;
  double duration = 0.0;
  std::array<double, 6> c{};
};

struct AxisSample {
  double p = 0.0, v = 0.0, a = 0.0, j = 0.0;
};

namespace detail {

inline double horner(const std::array<double, 6>& c, int deriv, double tau) {
  // Coefficients of the deriv-th derivative evaluated by Horner's rule.
  double acc = 0.0;
  for (int k = 5; k >= deriv; --k) {
    double f = 1.0;
    for (int m = 0; m < deriv; ++m) f *= static_cast<double>(k - m);
    acc = acc * tau + f * c[k];
  }
  return acc;
}

inline std::array<double, 6> derivative(const std::array<double, 6>& c) {
  std::array<double, 6> d{};
  for (int k = 1; k < 6; ++k) d[k - 1] = k * c[k];
  return d;
}

/// Real roots in (lo, hi) of a polynomial with up to 6 coefficients.
inline std::vector<double> real_roots(const std::array<double, 6>& c, double lo, double hi) {
  int deg = 5;
  const double mag = std::max(1e-300, *std::max_element(c.begin(), c.end(), [](double a, double b) {
                       return std::abs(a) < std::abs(b);
                     }));
  while (deg > 0 && std::abs(c[deg]) <= 1e-14 * std::abs(mag)) --deg;
  std::vector<double> roots;
  if (deg <= 0) return roots;
  if (deg == 1) {
    roots.push_back(-c[0] / c[1]);
  } else {
    MatX comp = MatX::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -c[i] / c[deg];
    Eigen::EigenSolver<MatX> es(comp, false);
    for (int i = 0; i < deg; ++i) {
      const auto ev = es.eigenvalues()[i];
      if (std::abs(ev.imag()) <= 1e-7 * (1.0 + std::abs(ev.real()))) roots.push_back(ev.real());
    }
  }
  std::vector<double> out;
  for (double r : roots) {
    // Newton polish.
    for (int it = 0; it < 4; ++it) {
      const double f = horner(c, 0, r);
      const double df = horner(c, 1, r);
      if (df == 0.0) break;
      r -= f / df;
    }
    if (r > lo && r < hi) out.push_back(r);
  }
  return out;
}

/// max |d^deriv p / dt^deriv| over a segment, exact up to root finding.
inline double max_abs(const PolySegment& s, int deriv) {
  std::array<double, 6> c = s.c;
  for (int k = 0; k < deriv; ++k) c = derivative(c);
  double best = std::max(std::abs(horner(c, 0, 0.0)), std::abs(horner(c, 0, s.duration)));
  for (double r : real_roots(derivative(c), 0.0, s.duration)) {
    best = std::max(best, std::abs(horner(c, 0, r)));
  }
  return best;
}

}  // namespace detail

class AxisTrajectory {
 public:
  AxisTrajectory() = default;
  AxisTrajectory(std::vector<PolySegment> segments, double cost, bool constrained)
      : segments_(std::move(segments)), cost_(cost), constrained_(constrained) {
    duration_ = segments_.empty() ? 0.0 : segments_.back().t0 + segments_.back().duration;
  }

  double duration() const { return duration_; }
  /// Time-normalized jerk cost (1/T) * integral(j^2).
  double cost() const { return cost_; }
  /// True when a velocity or jerk limit shaped the solution.
  bool constrained() const { return constrained_; }
  const std::vector<PolySegment>& segments() const { return segments_; }

  /// Evaluates the trajectory; beyond T it extrapolates with constant
  /// terminal acceleration (zero jerk).
  AxisSample sample(double t) const {
    if (segments_.empty()) return {};
    if (t >= duration_) {
      const auto end = sample_segment(segments_.back(), segments_.back().duration);
      const double dt = t - duration_;
      return {end.p + end.v * dt + 0.5 * end.a * dt * dt, end.v + end.a * dt, end.a, 0.0};
    }
    t = std::max(t, 0.0);
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const PolySegment& s) { return v < s.t0; });
    const auto& seg = *std::prev(it);
    return sample_segment(seg, t - seg.t0);
  }

  double max_abs_velocity() const { return max_over_segments(1); }
  double max_abs_jerk() const { return max_over_segments(3); }

 private:
  static AxisSample sample_segment(const PolySegment& s, double tau) {
    return {detail::horner(s.c, 0, tau), detail::horner(s.c, 1, tau), detail::horner(s.c, 2, tau),
            detail::horner(s.c, 3, tau)};
  }
  double max_over_segments(int deriv) const {
    double m = 0.0;
    for (const auto& s : segments_) m = std::max(m, detail::max_abs(s, deriv));
    return m;
  }

  std::vector<PolySegment> segments_;
  double duration_ = 0.0;
  double cost_ = 0.0;
  bool constrained_ = false;
};

/// Closed-form minimum-jerk quintic meeting both boundary states at T.
inline PolySegment min_jerk_quintic(const AxisBoundary& b, double T) {
  const double dp = b.pT - (b.p0 + b.v0 * T + 0.5 * b.a0 * T * T);
  const double dv = b.vT - (b.v0 + b.a0 * T);
  const double da = b.aT - b.a0;
  PolySegment s;
  s.t0 = 0.0;
  s.duration = T;
  s.c = {b.p0,
         b.v0,
         0.5 * b.a0,
         (10.0 * dp - 4.0 * dv * T + 0.5 * da * T * T) / std::pow(T, 3),
         (-15.0 * dp + 7.0 * dv * T - da * T * T) / std::pow(T, 4),
         (6.0 * dp - 3.0 * dv * T + 0.5 * da * T * T) / std::pow(T, 5)};
  return s;
}

/// integral over the segment of j(tau)^2.
inline double jerk_energy(const PolySegment& s) {
  // j = a + b tau + c tau^2
  const double a = 6.0 * s.c[3], b = 24.0 * s.c[4], c = 60.0 * s.c[5];
  const double T = s.duration;
  return a * a * T + a * b * T * T + (b * b + 2.0 * a * c) * std::pow(T, 3) / 3.0 +
         b * c * std::pow(T, 4) / 2.0 + c * c * std::pow(T, 5) / 5.0;
}

inline bool within_limits(const AxisTrajectory& tr, const MotionLimits& lim, double tol = 1e-9) {
  return tr.max_abs_velocity() <= lim.v_max + tol && tr.max_abs_jerk() <= lim.j_max + tol;
}

inline AxisTrajectory quintic_trajectory(const AxisBoundary& b, double T) {
  const auto seg = min_jerk_quintic(b, T);
  return AxisTrajectory({seg}, jerk_energy(seg) / T, false);
}

namespace detail {

/// Sensitivities of p, v, a at time t to the jerk of segment [tm, tm + h].
struct JerkInfluence {
  double p = 0.0, v = 0.0, a = 0.0;
};

inline JerkInfluence influence(double t, double tm, double h) {
  if (t <= tm) return {};
  const double e = tm + h;
  if (t <= e) {
    const double d = t - tm;
    return {d * d * d / 6.0, d * d / 2.0, d};
  }
  const double r = t - e;
  return {h * h * h / 6.0 + h * h / 2.0 * r + h * r * r / 2.0, h * h / 2.0 + h * r, h};
}

inline std::optional<AxisTrajectory> solve_piecewise_qp(const AxisBoundary& b, double T,
                                                       const MotionLimits& lim, int N,
                                                       double v_bound, bool with_velocity) {
  const double h = T / N;
  QpProblem qp;
  qp.H = MatX::Identity(N, N) * (2.0 * h / T);
  qp.c = VecX::Zero(N);
  qp.E = MatX::Zero(3, N);
  qp.d = VecX::Zero(3);
  for (int m = 0; m < N; ++m) {
    const auto inf = influence(T, m * h, h);
    qp.E(0, m) = inf.p;
    qp.E(1, m) = inf.v;
    qp.E(2, m) = inf.a;
  }
  qp.d << b.pT - (b.p0 + b.v0 * T + 0.5 * b.a0 * T * T), b.vT - (b.v0 + b.a0 * T), b.aT - b.a0;

  // Velocity enforced at knots and segment midpoints.
  std::vector<double> vt;
  if (with_velocity) {
    for (int k = 1; k < 2 * N; ++k) vt.push_back(0.5 * h * k);
  }
  const Eigen::Index mv = static_cast<Eigen::Index>(vt.size());
  const Eigen::Index mj = std::isfinite(lim.j_max) ? 2 * N : 0;
  qp.G = MatX::Zero(mj + 2 * mv, N);
  qp.h = VecX::Zero(mj + 2 * mv);
  for (int m = 0; mj > 0 && m < N; ++m) {
    qp.G(2 * m, m) = 1.0;
    qp.G(2 * m + 1, m) = -1.0;
    qp.h(2 * m) = lim.j_max;
    qp.h(2 * m + 1) = lim.j_max;
  }
  for (Eigen::Index k = 0; k < mv; ++k) {
    const double t = vt[k];
    const double base = b.v0 + b.a0 * t;
    const Eigen::Index r = mj + 2 * k;
    for (int m = 0; m < N; ++m) {
      const double iv = influence(t, m * h, h).v;
      qp.G(r, m) = iv;
      qp.G(r + 1, m) = -iv;
    }
    qp.h(r) = v_bound - base;
    qp.h(r + 1) = v_bound + base;
  }
  const auto res = solve_qp(qp);
  if (!res.ok()) return std::nullopt;

  std::vector<PolySegment> segs;
  segs.reserve(N);
  double p = b.p0, v = b.v0, a = b.a0, energy = 0.0;
  for (int m = 0; m < N; ++m) {
    const double j = res.x[m];
    PolySegment s;
    s.t0 = m * h;
    s.duration = h;
    s.c = {p, v, 0.5 * a, j / 6.0, 0.0, 0.0};
    segs.push_back(s);
    p += v * h + 0.5 * a * h * h + j * h * h * h / 6.0;
    v += a * h + 0.5 * j * h * h;
    a += j * h;
    energy += j * j * h;
  }
  return AxisTrajectory(std::move(segs), energy / T, true);
}

}  // namespace detail

/// Minimum-jerk trajectory at a fixed duration with velocity and jerk limits.
inline AxisTrajectory plan_axis_fixed(const AxisBoundary& b, double T, const MotionLimits& lim,
                                      const PlannerOptions& opt = {}) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("plan_axis: duration must be > 0");
  auto quintic = quintic_trajectory(b, T);
  if (within_limits(quintic, lim)) return quintic;

  if (std::abs(b.v0) > lim.v_max || std::abs(b.vT) > lim.v_max) {
    throw InfeasiblePlan("v_max", "plan_axis: boundary velocity exceeds v_max");
  }
  const double mean_speed = std::abs(b.pT - b.p0) / T;
  if (mean_speed > lim.v_max) {
    throw InfeasiblePlan("v_max", "plan_axis: displacement unreachable under v_max within T");
  }

  double bound = lim.v_max;
  for (int attempt = 0; attempt < 6; ++attempt) {
    auto tr = detail::solve_piecewise_qp(b, T, lim, opt.qp_segments, bound, true);
    if (!tr) break;
    const double over = tr->max_abs_velocity() - lim.v_max;
    if (over <= 1e-9 && tr->max_abs_jerk() <= lim.j_max + 1e-9) return *tr;
    bound -= std::max(over, 0.0) + 1e-7;
  }
  const bool jerk_alone = detail::solve_piecewise_qp(b, T, lim, opt.qp_segments, lim.v_max, false)
                              .has_value();
  throw InfeasiblePlan(jerk_alone ? "v_max" : "j_max",
                       std::string("plan_axis: no trajectory within ") +
                           (jerk_alone ? "v_max" : "j_max") + " at the requested duration");
}

inline bool at_rest_on_target(const AxisBoundary& b) {
  return b.p0 == b.pT && b.v0 == 0.0 && b.vT == 0.0 && b.a0 == 0.0 && b.aT == 0.0;
}

/// Duration for a free-T axis: golden-section on cost + time_weight * T,
/// then the shortest longer duration that respects the limits.
inline double select_duration(const AxisBoundary& b, const MotionLimits& lim,
                              const PlannerOptions& opt = {}) {
  if (at_rest_on_target(b)) return opt.T_min;
  auto objective = [&](double T) { return quintic_trajectory(b, T).cost() + opt.time_weight * T; };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  // Golden-section in log T; the objective is unimodal for these problems.
  double lo = std::log(opt.T_min), hi = std::log(opt.T_max);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = objective(std::exp(x1)), f2 = objective(std::exp(x2));
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = objective(std::exp(x1));
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = objective(std::exp(x2));
    }
  }
  double T = std::exp(0.5 * (lo + hi));
  if (within_limits(quintic_trajectory(b, T), lim)) return T;

  // Quintic feasibility is not monotone in T (a nonzero initial
  // acceleration overshoots more the longer the plan), so scan upward on a
  // geometric grid and refine the first feasible bracket.
  std::vector<double> grid;
  for (double c = T * 1.25; c <= opt.T_max; c *= 1.25) grid.push_back(c);
  double a = T;
  for (double c : grid) {
    if (within_limits(quintic_trajectory(b, c), lim)) {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + c);
        (within_limits(quintic_trajectory(b, mid), lim) ? c : a) = mid;
      }
      return c;
    }
    a = c;
  }
  // No quintic fits: shortest duration on the grid where the constrained
  // fixed-duration problem has a solution.
  grid.insert(grid.begin(), T);
  for (double c : grid) {
    if (std::abs(b.pT - b.p0) / c > lim.v_max) continue;
    try {
      plan_axis_fixed(b, c, lim, opt);
      return c;
    } catch (const InfeasiblePlan&) {
    }
  }
  throw InfeasiblePlan(std::abs(b.v0) > lim.v_max || std::abs(b.vT) > lim.v_max ? "v_max" : "j_max",
                       "select_duration: no feasible duration below T_max");
}

inline AxisTrajectory plan_axis(const AxisBoundary& b, const MotionLimits& lim,
                                const PlannerOptions& opt = {}) {
  for (double v : {b.p0, b.v0, b.a0, b.pT, b.vT, b.aT}) {
    if (!std::isfinite(v)) throw InvalidArgument("plan_axis: non-finite boundary state");
  }
  return plan_axis_fixed(b, b.T ? *b.T : select_duration(b, lim, opt), lim, opt);
}

struct Plan3D {
  std::array<AxisTrajectory, 3> axes;
  double T = 0.0;
  double total_cost = 0.0;

  Vec3 position(double t) const {
    return {axes[0].sample(t).p, axes[1].sample(t).p, axes[2].sample(t).p};
  }
  Vec3 velocity(double t) const {
    return {axes[0].sample(t).v, axes[1].sample(t).v, axes[2].sample(t).v};
  }
  Vec3 acceleration(double t) const {
    return {axes[0].sample(t).a, axes[1].sample(t).a, axes[2].sample(t).a};
  }
  Vec3 jerk(double t) const {
    return {axes[0].sample(t).j, axes[1].sample(t).j, axes[2].sample(t).j};
  }
};

/// Plans the three axes independently over a common duration.
inline Plan3D plan_3d(const std::array<AxisBoundary, 3>& bs, const MotionLimits& lim,
                      const PlannerOptions& opt = {}) {
  double T = 0.0;
  for (int k = 0; k < 3; ++k) {
    try {
      T = std::max(T, bs[k].T ? *bs[k].T : select_duration(bs[k], lim, opt));
    } catch (const InfeasiblePlan& e) {
      throw InfeasiblePlan(e.binding(), "plan_3d: axis " + std::to_string(k) + ": " + e.what());
    }
  }
  Plan3D out;
  out.T = T;
  for (int k = 0; k < 3; ++k) {
    try {
      out.axes[k] = plan_axis_fixed(bs[k], T, lim, opt);
    } catch (const InfeasiblePlan& e) {
      throw InfeasiblePlan(e.binding(), "plan_3d: axis " + std::to_string(k) + ": " + e.what());
    }
    out.total_cost += out.axes[k].cost();
  }
  return out;
}

/// Thrust and body-rate demand of a planned trajectory via differential
/// flatness of the point-mass-with-thrust model.
struct FeasibilityReport {
  double max_thrust = 0.0;
  double min_thrust = 0.0;
  double max_rate = 0.0;
  bool thrust_ok = true;
  bool rate_ok = true;

  bool ok() const { return thrust_ok && rate_ok; }
  std::string binding() const { return !thrust_ok ? "thrust" : (!rate_ok ? "omega_max" : ""); }
};

inline FeasibilityReport check_input_feasibility(const Plan3D& plan, const MotionLimits& lim,
                                                 double mass, double g = kGravity,
                                                 double yaw_rate = 0.0, double rate_hz = 1000.0) {
  FeasibilityReport rep;
  rep.min_thrust = std::numeric_limits<double>::infinity();
  const int n = std::max(1, static_cast<int>(std::ceil(plan.T * rate_hz)));
  for (int i = 0; i <= n; ++i) {
    const double t = plan.T * i / n;
    const Vec3 acc = plan.acceleration(t) + Vec3{0.0, 0.0, g};
    const Vec3 jerk = plan.jerk(t);
    const double an = acc.norm();
    const double f = mass * an;
    double w = 0.0;
    if (an > 1e-9) {
      const Vec3 zb = acc / an;
      const Vec3 perp = jerk - jerk.dot(zb) * zb;
      w = std::hypot(perp.norm() / an, yaw_rate);
    } else {
      w = std::numeric_limits<double>::infinity();
    }
    rep.max_thrust = std::max(rep.max_thrust, f);
    rep.min_thrust = std::min(rep.min_thrust, f);
    rep.max_rate = std::max(rep.max_rate, w);
  }
  rep.thrust_ok = rep.min_thrust >= lim.f_min && rep.max_thrust <= lim.f_max;
  rep.rate_ok = rep.max_rate <= lim.omega_max;
  return rep;
}

/// plan_3d followed by duration stretching until the thrust and body-rate
/// limits also hold.
inline Plan3D plan_3d_feasible(std::array<AxisBoundary, 3> bs, const MotionLimits& lim,
                               double mass, const PlannerOptions& opt = {}) {
  Plan3D plan = plan_3d(bs, lim, opt);
  for (int it = 0; it < 60; ++it) {
    const auto rep = check_input_feasibility(plan, lim, mass);
    if (rep.ok()) return plan;
    const double T = plan.T * 1.1;
    if (T > opt.T_max) break;
    for (auto& b : bs) b.T = T;
    plan = plan_3d(bs, lim, opt);
  }
  const auto rep = check_input_feasibility(plan, lim, mass);
  throw InfeasiblePlan(rep.binding(), "plan_3d_feasible: input limits unreachable");
}

inline void write_axis_csv(std::ostream& os, const AxisTrajectory& tr, double rate_hz) {
  os << "t,p,v,a,j\n";
  const int n = std::max(1, static_cast<int>(std::ceil(tr.duration() * rate_hz)));
  for (int i = 0; i <= n; ++i) {
    const double t = tr.duration() * i / n;
    const auto s = tr.sample(t);
    os << t << ',' << s.p << ',' << s.v << ',' << s.a << ',' << s.j << '\n';
  }
}

inline void write_plan_csv(std::ostream& os, const Plan3D& plan, double rate_hz) {
  os << "t,px,vx,ax,jx,py,vy,ay,jy,pz,vz,az,jz\n";
  const int n = std::max(1, static_cast<int>(std::ceil(plan.T * rate_hz)));
  for (int i = 0; i <= n; ++i) {
    const double t = plan.T * i / n;
    os << t;
    for (const auto& ax : plan.axes) {
      const auto s = ax.sample(t);
      os << ',' << s.p << ',' << s.v << ',' << s.a << ',' << s.j;
    }
    os << '\n';
  }
}

}  // namespace landair
