// Acceptance checks: one PASS/FAIL line per criterion. Exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "landair/batch.hpp"
#include "landair/chassis_dynamics.hpp"
#include "landair/ground_effect.hpp"
#include "landair/jlt_planner.hpp"
#include "landair/kinematics.hpp"
#include "landair/mode_fsm.hpp"
#include "support/generators.hpp"

using namespace landair;
using landair::testing::Gen;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void check(bool ok, const std::string& note) {
    pass = pass && ok;
    notes.push_back((ok ? "" : "!") + note);
  }
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.check(false, std::string("exception: ") + e.what());
  }
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ":";
  for (const auto& n : o.notes) std::cout << ' ' << n << ';';
  std::cout << std::endl;
  if (!o.pass) ++failures;
}

// ---------------------------------------------------------------------------

Outcome formula_oracles() {
  Outcome o;
  const auto t0 = Clock::now();
  Gen gen(101);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Mat3 r = euler_to_rotation(gen.euler(1e-6));
    worst = std::max(worst, (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(r.determinant() - 1.0));
  }
  o.check(worst <= 1e-12, fmt("rotation orthonormality %.1e <= 1e-12", worst));

  const GroundEffectParams gp;
  const double ratio = thrust_ratio(gp.R / 2.0, 0.0, induced_velocity(50.0, gp), gp).ratio;
  o.check(ratio == 4.0 / 3.0, fmt("ground-effect ratio at z=R/2, V=0: %.17g (exact 4/3)", ratio));

  const auto [fx, fy] = friction_ellipse_clamp(300.0, 900.0, 500.0, 1.0);
  o.check(fx == 300.0 && fy == 400.0, fmt("ellipse clamp 3-4-5: (%g, %g)", fx, fy));

  double odd = 0.0, excess = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20000; ++k) {
    TireParams tp;
    tp.B = gen.uniform(2, 20);
    tp.C = gen.uniform(0.5, 2.0);
    tp.E = gen.uniform(-1.0, 1.0);
    tp.mu = gen.uniform(0.2, 1.2);
    const double load = gen.uniform(0, 2000), alpha = gen.uniform(-1.5, 1.5);
    const double f = tire_lateral_force(alpha, load, tp);
    odd = std::max(odd, std::abs(tire_lateral_force(-alpha, load, tp) + f));
    excess = std::max(excess, std::abs(f) - tp.peak(load));
  }
  o.check(odd <= 1e-9, fmt("tire force odd symmetry %.1e", odd));
  o.check(excess <= 1e-9, fmt("tire force within peak (max excess %.1e N)", excess));
  const double t = seconds_since(t0);
  o.check(t < 1.0, fmt("%.3f s < 1 s", t));
  return o;
}

Outcome jlt_oracle() {
  Outcome o;
  MotionLimits open;
  open.v_max = std::numeric_limits<double>::infinity();
  open.j_max = std::numeric_limits<double>::infinity();
  const auto unit = plan_axis({0, 0, 0, 1, 0, 0, 1.0}, open);
  const std::array<double, 6> quintic{0, 0, 0, 10, -15, 6};
  double coef = 0.0;
  for (int k = 0; k < 6; ++k) coef = std::max(coef, std::abs(unit.segments().at(0).c[k] - quintic[k]));
  o.check(coef <= 1e-9, fmt("unit quintic coefficients %.1e <= 1e-9", coef));
  o.check(std::abs(unit.cost() - 720.0) <= 1e-9, fmt("jerk cost %.12g (720)", unit.cost()));

  const auto doc = landair::testing::load_json("jlt_collocation_oracle.json");
  const auto t0 = Clock::now();
  double worst = 0.0;
  int n = 0;
  for (const auto& in : doc["instances"]) {
    const AxisBoundary b{in["p0"], in["v0"], in["a0"], in["pT"], in["vT"], in["aT"], in["T"].get<double>()};
    MotionLimits lim;
    lim.v_max = in["v_max"];
    lim.j_max = in["j_max"];
    const auto tr = plan_axis(b, lim);
    const double ref = in["cost"];
    worst = std::max(worst, std::abs(tr.cost() - ref) / ref);
    ++n;
  }
  const double t = seconds_since(t0);
  o.check(n == 20, fmt("%d oracle instances", n));
  o.check(worst <= 0.02, fmt("worst cost gap to collocation %.3f%% <= 2%%", 100.0 * worst));
  o.check(t < 30.0, fmt("%.2f s < 30 s", t));
  return o;
}

Outcome lqr_oracle() {
  Outcome o;
  MatX A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const auto di = solve_care(A, B, MatX::Identity(2, 2), MatX::Identity(1, 1));
  const double gap = std::max(std::abs(di.K(0, 0) - 1.0), std::abs(di.K(0, 1) - std::sqrt(3.0)));
  o.check(gap <= 1e-6, fmt("double integrator K = [%.9f, %.9f], error %.1e", di.K(0, 0), di.K(0, 1), gap));

  // Every linearization a landing scenario uses: hover, and the constant
  // attitudes of the slope-aligned final approach.
  const RobotParams p;
  const FlightParams& fp = p.flight;
  const auto w = default_landing_weights(fp);
  double residual = 0.0, pole = -std::numeric_limits<double>::infinity();
  for (double slope : {0.0, 10.0, 30.0}) {
    VecX x0 = VecX::Zero(12);
    x0[7] = -deg2rad(slope);
    const VecX u0 = VecX::Constant(4, fp.m * fp.g / (4.0 * std::cos(deg2rad(slope))));
    const auto mdl = slope == 0.0 ? linearize_hover(fp)
                                  : linearize([&](const VecX& x, const VecX& u) { return flight_model_derivative(x, u, fp); },
                                              x0, u0);
    const auto s = solve_lqr(mdl, w);
    residual = std::max(residual, s.residual);
    pole = std::max(pole, s.max_real_pole());
  }
  o.check(residual <= 1e-9, fmt("worst Riccati residual %.2e <= 1e-9", residual));
  o.check(pole < 0.0, fmt("closed-loop max real part %.4f < 0", pole));
  return o;
}

Outcome integrator() {
  Outcome o;
  const RobotParams p;
  const Terrain terrain;
  RobotState s0 = hover_state({0.0, 0.0, 5.0}, p);
  s0.V = {1.0, -0.5, 0.3};
  s0.eta = {0.2, -0.15, 0.4};
  s0.omega = {3.0, -2.0, 4.0};
  ControlInput u;
  const double wh = hover_rotor_speed(p);
  u.rotors.omega = {1.05 * wh, 0.97 * wh, 1.02 * wh, 0.95 * wh};
  auto run = [&](double dt) {
    SimConfig cfg;
    cfg.dt = dt;
    RobotState s = s0;
    const int n = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < n; ++k) s = rk4_step(s, u, Vec3::Zero(), terrain, p, cfg, k * dt);
    return VecX(s.vec().head<12>());
  };
  const VecX ref = run(1.5625e-4);
  const double e1 = (run(2.5e-3) - ref).norm(), e2 = (run(1.25e-3) - ref).norm(), e3 = (run(6.25e-4) - ref).norm();
  const double q1 = std::log2(e1 / e2), q2 = std::log2(e2 / e3);
  o.check(q1 >= 3.7 && q1 <= 4.3 && q2 >= 3.7 && q2 <= 4.3, fmt("observed order %.3f, %.3f in [3.7, 4.3]", q1, q2));

  Scenario sc;
  sc.slope_deg = 30.0;
  sc.disturbance.cls = DisturbanceClass::Fixed60;
  auto csv = [&](std::uint64_t seed) {
    std::ostringstream os;
    write_log_csv(os, run_scenario(sc, seed));
    return os.str();
  };
  const std::string a = csv(7);
  o.check(a == csv(7), "same seed gives a byte-identical log");
  o.check(a != csv(8), "different seed gives a different log");
  return o;
}

Outcome statics() {
  Outcome o;
  const RobotParams p;
  SimConfig cfg;
  cfg.contact_k = p.suspension.K2;
  cfg.contact_b = p.suspension.B2;
  ControlInput u;
  u.rotors = RotorSpeeds::uniform(0.0);
  u.brake = true;
  auto settle = [&](RobotState s, const Terrain& terrain) {
    for (int k = 0; k < 2000; ++k) s = rk4_step(s, u, Vec3::Zero(), terrain, p, cfg, k * cfg.dt);
    return diagnose(s, u, terrain, p, cfg);
  };
  const double W = p.weight();
  o.check(std::abs(W - 202.28) <= 0.01, fmt("weight %.3f N", W));
  const Terrain flat;
  const auto d0 = settle(rest_state(-1.0, 0.0, flat, p, cfg), flat);
  const double e0 = std::abs(d0.contact_force.z() - 202.28) / 202.28;
  o.check(d0.contacts() == 4 && e0 <= 1e-3, fmt("flat: %.3f N, error %.4f%% <= 0.1%%", d0.contact_force.z(), 100 * e0));

  const double beta = deg2rad(30.0);
  const Terrain slope(beta);
  const auto d1 = settle(rest_state(1.0, 0.0, slope, p, cfg), slope);
  const Vec3 t_up{std::cos(beta), 0.0, std::sin(beta)};
  const double N = d1.contact_force.dot(slope.ramp_normal()), F = d1.contact_force.dot(t_up);
  const double eN = std::abs(N - W * std::cos(beta)) / (W * std::cos(beta));
  const double eF = std::abs(F - W * std::sin(beta)) / (W * std::sin(beta));
  o.check(d1.contacts() == 4 && eN <= 1e-3 && eF <= 1e-3,
          fmt("30 deg: normal %.3f N (%.4f%%), tangential %.3f N (%.4f%%)", N, 100 * eN, F, 100 * eF));
  return o;
}

// Offset of a run for the conservative pooled mean: the touchdown offset, or
// the distance of the final logged position from the target when touchdown
// was never confirmed.
std::optional<double> conservative_offset(const RunResult& r, const Eigen::Vector2d& target) {
  if (r.metrics.landing_offset_mm) return r.metrics.landing_offset_mm;
  if (r.log_path.empty()) return std::nullopt;
  std::ifstream in(r.log_path);
  const SimLog log = read_log_csv(in);
  if (log.rows.empty() || log.diverged) return std::nullopt;
  return 1000.0 * (log.rows.back().P.head<2>() - target).norm();
}

Outcome comparative() {
  Outcome o;
  const fs::path cfg_path = fs::path(LANDAIR_TEST_DATA_DIR) / ".." / ".." / "configs" / "table2.json";
  const auto cfg = load_batch_config(cfg_path.string());
  const fs::path out = fs::temp_directory_path() / ("landair_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(out);
  BatchOptions opt;
  opt.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  opt.output_dir = out.string();
  const auto t0 = Clock::now();
  const auto result = run_batch(cfg.scenarios, opt);
  const double t = seconds_since(t0);
  std::size_t runs = 0;
  for (const auto& sr : result.scenarios) runs += sr.runs.size();
  o.check(t < 600.0, fmt("%zu runs in %.1f s < 600 s", runs, t));
  o.check(result.diverged == 0, fmt("%d diverged", result.diverged));

  std::map<double, std::array<std::vector<double>, 2>> conservative;
  for (const auto& sr : result.scenarios) {
    if (sr.scenario.disturbance.cls == DisturbanceClass::None) continue;
    const int side = sr.scenario.controller == "proposed" ? 0 : 1;
    for (const auto& r : sr.runs) {
      if (const auto v = conservative_offset(r, sr.scenario.target)) conservative[sr.scenario.slope_deg][side].push_back(*v);
    }
  }
  const auto cmp = compare_controllers(result);
  o.check(cmp.size() == 2, fmt("%zu slopes compared", cmp.size()));
  for (const auto& c : cmp) {
    const double s = c.slope_deg;
    o.check(c.time_proposed.n == 10 && c.time_baseline.n == 10 && c.time_reduction() >= 0.10,
            fmt("%g deg (i) landing time %.3f vs %.3f s, %.1f%% faster >= 10%%", s, c.time_proposed.mean,
                c.time_baseline.mean, 100 * c.time_reduction()));
    o.check(c.offset_reduction() >= 0.20,
            fmt("%g deg (ii) disturbed offset %.1f mm (n=%d) vs %.1f mm (n=%d), %.1f%% lower >= 20%%", s,
                c.offset_proposed.mean, c.offset_proposed.n, c.offset_baseline.mean, c.offset_baseline.n,
                100 * c.offset_reduction()));
    const Aggregate cp = aggregate(conservative[s][0]), cb = aggregate(conservative[s][1]);
    const double cr = 1.0 - cp.mean / cb.mean;
    o.check(cr >= 0.20, fmt("%g deg (ii) counting %d/%d runs without touchdown at their final position: %.1f vs "
                            "%.1f mm, %.1f%% lower >= 20%%",
                            s, c.proposed_failures, c.baseline_failures, cp.mean, cb.mean, 100 * cr));
    o.check(c.stroke_reduction() >= 0.15, fmt("%g deg (iii) peak stroke %.2f vs %.2f mm, %.1f%% lower >= 15%%", s,
                                              c.stroke_proposed.mean, c.stroke_baseline.mean,
                                              100 * c.stroke_reduction()));
    o.check(c.overshoot_wins >= 8, fmt("%g deg (iv) lower pitch overshoot in %d/%d repeats >= 8", s, c.overshoot_wins,
                                       c.overshoot_pairs));
  }
  fs::remove_all(out);
  return o;
}

Outcome fsm_fuzz() {
  Outcome o;
  constexpr std::array<Command, 6> commands{Command::None, Command::Takeoff, Command::Land,
                                            Command::Drive, Command::Stop,    Command::FlyTo};
  Gen gen(909);
  long steps = 0, edge_checks = 0;
  int exclusion = 0, ordering = 0, edge = 0, airborne_transform = 0, folded_flight = 0, rejected = 0;
  const auto t0 = Clock::now();
  for (int seq = 0; seq < 100000; ++seq) {
    FsmState s;
    s.mode = Mode::Static;
    s.arms_folded = gen.coin();
    const int len = gen.integer(1, 40);
    for (int k = 0; k < len; ++k, ++steps) {
      FsmInputs x;
      x.clearance = gen.coin(0.2) ? 0.5 : gen.uniform(-0.05, 1.5);
      x.speed = gen.uniform(0.0, 2.0);
      x.touchdown = gen.coin(0.2);
      x.plan_finished = gen.coin(0.2);
      x.dt = gen.coin(0.1) ? gen.uniform(0.0, 3.0) : gen.uniform(0.0, 0.05);
      const Command c = commands[static_cast<std::size_t>(gen.integer(0, 5))];
      const FsmState before = s;
      const auto r = fsm_step(s, x, c);
      s = r.state;
      if (r.routing.rotors && r.routing.wheel_drive) ++exclusion;
      try {
        check_ordering(s.transform);
      } catch (const OrderingViolation&) {
        ++ordering;
      }
      if (before.mode == Mode::Takeoff && r.accepted && c != Command::Land) {
        ++edge_checks;
        if ((s.mode == Mode::Flying) != (x.clearance > 0.5)) ++edge;
      }
      if (s.mode == Mode::Transform && before.mode != Mode::Transform &&
          !(before.mode == Mode::Static || before.mode == Mode::Drive ||
            (before.mode == Mode::Landing && x.touchdown))) {
        ++airborne_transform;
      }
      if (routing_for(s.mode).rotors && s.arms_folded) ++folded_flight;
      if (!r.accepted) {
        const FsmState idle = fsm_step(before, x).state;
        if (idle.mode != s.mode || idle.arms_folded != s.arms_folded || idle.transform.stage != s.transform.stage) {
          ++rejected;
        }
      }
    }
  }
  const double t = seconds_since(t0);
  o.check(exclusion == 0, fmt("rotor/wheel-drive overlap in %d of %ld steps", exclusion, steps));
  o.check(ordering == 0, fmt("arm-ordering violations %d", ordering));
  o.check(edge == 0 && edge_checks > 0, fmt("0.5 m edge mismatches %d of %ld", edge, edge_checks));
  o.check(airborne_transform == 0, fmt("transforms entered in the air %d", airborne_transform));
  o.check(folded_flight == 0, fmt("flight modes with folded arms %d", folded_flight));
  o.check(rejected == 0, fmt("rejected commands with side effects %d", rejected));
  o.check(true, fmt("100000 sequences in %.1f s", t));
  return o;
}

}  // namespace

int main() {
  std::cout.setf(std::ios::unitbuf);
  report("formula oracles", formula_oracles);
  report("JLT oracle", jlt_oracle);
  report("LQR oracle", lqr_oracle);
  report("integrator", integrator);
  report("statics", statics);
  report("comparative claims", comparative);
  report("FSM fuzzing", fsm_fuzz);
  std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
