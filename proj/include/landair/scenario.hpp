#pragma once

// Closed-loop scenario execution: FSM + controller + dynamics, producing a
// time-series log with landing events. Logs round-trip through CSV.

#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "landair/controllers.hpp"

namespace landair {

enum class ScenarioKind { Landing, Idle, Takeoff };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Landing: return "landing";
    case ScenarioKind::Idle: return "idle";
    case ScenarioKind::Takeoff: return "takeoff";
  }
  return "landing";
}

struct Scenario {
  std::string name = "scenario";
  ScenarioKind kind = ScenarioKind::Landing;
  double slope_deg = 10.0;
  std::string controller = "proposed";  // or "pid-baseline"
  DisturbanceSpec disturbance;
  int repeats = 1;
  std::uint64_t seed = 1;
  Eigen::Vector2d target{1.5, 0.0};
  Vec3 start_offset{-1.0, 0.0, 2.0};  // from the target: dx, dy, CoM height above the target ground
  double jitter = 0.05;               // uniform start-position jitter per axis, m
  double duration = 12.0;             // s
  double dt = 1e-3;
  double command_time = 0.5;   // s, when the mission command is issued
  double descent_speed = 0.3;  // m/s, terminal vertical speed of the landing plan
  double settle_time = 1.0;    // s simulated after touchdown
  bool run_out = false;        // hand over to Drive after touchdown
  int log_every = 1;           // log every n-th step
  nlohmann::json params = nlohmann::json::object();

  void validate() const {
    if (repeats < 1) throw ConfigError("scenario '" + name + "': repeats must be >= 1");
    if (!(slope_deg >= 0.0 && slope_deg <= 35.0)) {
      throw ConfigError("scenario '" + name + "': slope_deg must be within [0, 35]");
    }
    if (controller != "proposed" && controller != "pid-baseline") {
      throw ConfigError("scenario '" + name + "': controller must be 'proposed' or 'pid-baseline'");
    }
    if (log_every < 1) throw ConfigError("scenario '" + name + "': log_every must be >= 1");
    if (!(duration > 0.0)) throw ConfigError("scenario '" + name + "': duration must be > 0");
    if (!(dt >= 1e-4 && dt <= 5e-3)) throw ConfigError("scenario '" + name + "': dt must be within [1e-4, 5e-3]");
    if (!(jitter >= 0.0)) throw ConfigError("scenario '" + name + "': jitter must be >= 0");
    if (!(disturbance.hold > 0.0)) throw ConfigError("scenario '" + name + "': disturbance hold must be > 0");
  }
};

inline std::unique_ptr<Controller> make_controller(const std::string& name, const RobotParams& p) {
  if (name == "proposed") {
    auto c = std::make_unique<FusionController>(p);
    if (!(c->lqr().max_real_pole() < 0.0)) throw NotStabilizable("closed loop is not Hurwitz");
    return c;
  }
  if (name == "pid-baseline") return std::make_unique<CascadePidController>(p);
  throw ConfigError("unknown controller '" + name + "'");
}

// ---------------------------------------------------------------------------
// Log

/// Frozen CSV column header.
inline constexpr const char* kLogColumns =
    "t,mode,x,y,z,vx,vy,vz,phi,theta,psi,p,q,r,"
    "stroke_fl,stroke_fr,stroke_rl,stroke_rr,"
    "omega_1,omega_2,omega_3,omega_4,"
    "wheel_fl,wheel_fr,wheel_rl,wheel_rr,"
    "dist_x,dist_y,dist_z,n_contact";

inline constexpr const char* kLogVersion = "landair-log v1";

struct LogRow {
  double t = 0.0;
  Mode mode = Mode::Static;
  Vec3 P = Vec3::Zero(), V = Vec3::Zero();
  EulerAngles eta;
  BodyRates omega;
  std::array<double, 4> stroke{};
  std::array<double, 4> rotor{};
  std::array<double, 4> wheel{};
  Vec3 disturbance = Vec3::Zero();
  int n_contact = 0;
};

struct TouchdownEvent {
  double t = 0.0;
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
};

struct SimLog {
  std::string scenario;
  std::string controller;
  std::uint64_t seed = 0;
  double slope_deg = 0.0;
  std::string disturbance = "none";
  Eigen::Vector2d target = Eigen::Vector2d::Zero();
  std::optional<double> plan_start;
  std::optional<double> first_contact;
  std::optional<double> all_contact;
  std::optional<TouchdownEvent> touchdown;
  bool diverged = false;
  std::string error;
  std::vector<LogRow> rows;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : "none"; }

inline std::optional<double> parse_opt(const std::string& s) {
  if (s == "none") return std::nullopt;
  return std::stod(s);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

inline void write_log_csv(std::ostream& os, const SimLog& log) {
  using detail::fmt;
  os << "# " << kLogVersion << '\n';
  os << "# scenario=" << log.scenario << '\n';
  os << "# controller=" << log.controller << '\n';
  os << "# seed=" << log.seed << '\n';
  os << "# slope_deg=" << fmt(log.slope_deg) << '\n';
  os << "# disturbance=" << log.disturbance << '\n';
  os << "# target=" << fmt(log.target.x()) << ',' << fmt(log.target.y()) << '\n';
  os << "# plan_start=" << detail::opt_fmt(log.plan_start) << '\n';
  os << "# first_contact=" << detail::opt_fmt(log.first_contact) << '\n';
  os << "# all_contact=" << detail::opt_fmt(log.all_contact) << '\n';
  if (log.touchdown) {
    os << "# touchdown=" << fmt(log.touchdown->t) << ',' << fmt(log.touchdown->xy.x()) << ','
       << fmt(log.touchdown->xy.y()) << '\n';
  } else {
    os << "# touchdown=none\n";
  }
  os << "# status=" << (log.diverged ? "diverged: " + log.error : std::string("ok")) << '\n';
  os << kLogColumns << '\n';
  for (const auto& r : log.rows) {
    os << fmt(r.t) << ',' << to_string(r.mode);
    for (double v : {r.P.x(), r.P.y(), r.P.z(), r.V.x(), r.V.y(), r.V.z(), r.eta.phi, r.eta.theta,
                     r.eta.psi, r.omega.p, r.omega.q, r.omega.r}) {
      os << ',' << fmt(v);
    }
    for (double v : r.stroke) os << ',' << fmt(v);
    for (double v : r.rotor) os << ',' << fmt(v);
    for (double v : r.wheel) os << ',' << fmt(v);
    for (int k = 0; k < 3; ++k) os << ',' << fmt(r.disturbance[k]);
    os << ',' << r.n_contact << '\n';
  }
}

inline SimLog read_log_csv(std::istream& is) {
  SimLog log;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  auto fail = [&](const std::string& what) {
    throw ConfigError("log line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto body = line.substr(line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq), val = body.substr(eq + 1);
      try {
        if (key == "scenario") log.scenario = val;
        else if (key == "controller") log.controller = val;
        else if (key == "seed") log.seed = std::stoull(val);
        else if (key == "slope_deg") log.slope_deg = std::stod(val);
        else if (key == "disturbance") log.disturbance = val;
        else if (key == "target") {
          const auto f = detail::split(val, ',');
          if (f.size() != 2) fail("target needs two values");
          log.target = {std::stod(f[0]), std::stod(f[1])};
        } else if (key == "plan_start") log.plan_start = detail::parse_opt(val);
        else if (key == "first_contact") log.first_contact = detail::parse_opt(val);
        else if (key == "all_contact") log.all_contact = detail::parse_opt(val);
        else if (key == "touchdown") {
          if (val != "none") {
            const auto f = detail::split(val, ',');
            if (f.size() != 3) fail("touchdown needs three values");
            log.touchdown = TouchdownEvent{std::stod(f[0]), {std::stod(f[1]), std::stod(f[2])}};
          }
        } else if (key == "status") {
          log.diverged = val != "ok";
          if (log.diverged) log.error = val;
        }
      } catch (const std::logic_error&) {
        fail("malformed header value for '" + key + "'");
      }
      continue;
    }
    if (!header_seen) {
      if (line != kLogColumns) fail("column header does not match the frozen log format");
      header_seen = true;
      continue;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 30) fail("expected 30 fields, got " + std::to_string(f.size()));
    LogRow r;
    try {
      std::size_t k = 0;
      r.t = std::stod(f[k++]);
      const auto m = parse_mode(f[k++]);
      if (!m) fail("unknown mode '" + f[1] + "'");
      r.mode = *m;
      auto next = [&]() { return std::stod(f[k++]); };
      r.P = {next(), next(), next()};
      r.V = {next(), next(), next()};
      r.eta.phi = next();
      r.eta.theta = next();
      r.eta.psi = next();
      r.omega.p = next();
      r.omega.q = next();
      r.omega.r = next();
      for (auto& v : r.stroke) v = next();
      for (auto& v : r.rotor) v = next();
      for (auto& v : r.wheel) v = next();
      r.disturbance = {next(), next(), next()};
      r.n_contact = std::stoi(f[k++]);
    } catch (const std::logic_error&) {
      fail("malformed number");
    }
    log.rows.push_back(r);
  }
  if (!header_seen) throw ConfigError("log has no column header");
  return log;
}

// ---------------------------------------------------------------------------
// Runner

struct ScenarioSetup {
  RobotParams params;
  Terrain terrain;
  RobotState initial;
  Mode initial_mode = Mode::Static;
};

inline ScenarioSetup setup_scenario(const Scenario& sc, std::uint64_t seed) {
  sc.validate();
  RobotParams p;
  if (!sc.params.is_null() && !sc.params.empty()) apply_overrides(p, sc.params);
  Terrain terrain(deg2rad(sc.slope_deg));
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7177u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> jit(-sc.jitter, sc.jitter);
  const Vec3 jitter{jit(rng), jit(rng), jit(rng)};
  ScenarioSetup out{p, terrain, {}, Mode::Static};
  const SimConfig cfg{sc.dt, sc.duration};
  switch (sc.kind) {
    case ScenarioKind::Landing: {
      const double ground = terrain.height(sc.target.x(), sc.target.y());
      const Vec3 start{sc.target.x() + sc.start_offset.x(), sc.target.y() + sc.start_offset.y(),
                       ground + sc.start_offset.z()};
      out.initial = hover_state(start + jitter, p);
      out.initial_mode = Mode::Hovering;
      break;
    }
    case ScenarioKind::Takeoff:
      out.initial = rest_state(sc.target.x(), sc.target.y(), terrain, p, cfg);
      out.initial_mode = Mode::Static;
      break;
    case ScenarioKind::Idle:
      out.initial = rest_state(-2.0, 0.0, terrain, p, cfg);
      out.initial_mode = Mode::Static;
      break;
  }
  return out;
}

inline SimLog run_scenario(const Scenario& sc, std::uint64_t seed) {
  auto setup = setup_scenario(sc, seed);
  const RobotParams& p = setup.params;
  const Terrain& terrain = setup.terrain;
  SimConfig cfg{sc.dt, sc.duration};
  cfg.seed = seed;
  cfg.contact_k = p.suspension.K2;
  cfg.contact_b = p.suspension.B2;
  cfg.validate();

  SimLog log;
  log.scenario = sc.name;
  log.controller = sc.controller;
  log.seed = seed;
  log.slope_deg = sc.slope_deg;
  log.disturbance = to_string(sc.disturbance.cls);
  log.target = sc.target;

  auto controller = make_controller(sc.controller, p);
  DisturbanceSpec dspec = sc.disturbance;
  dspec.seed = seed;
  const DisturbanceGenerator disturbance(dspec);
  TouchdownDetector touchdown;
  FsmConfig fsm_cfg;
  FsmState fsm;
  fsm.mode = setup.initial_mode;
  if (sc.run_out) fsm.after_landing = Mode::Drive;

  RobotState state = setup.initial;
  ControlInput u;
  if (fsm.mode == Mode::Hovering) u.rotors = RotorSpeeds::uniform(hover_rotor_speed(p));
  else u.brake = true;

  double mode_entry = 0.0;
  bool command_sent = false;
  bool first_step = true;
  std::optional<double> touchdown_at;
  std::optional<Eigen::Vector2d> window_xy;
  const auto steps = static_cast<long>(std::llround(sc.duration / sc.dt));
  for (long k = 0; k <= steps; ++k) {
    const double t = k * sc.dt;
    const Diagnostics diag = diagnose(state, u, terrain, p, cfg);
    const int contacts = diag.contacts();

    const bool landing_phase = fsm.mode == Mode::TrajectoryPlanning || fsm.mode == Mode::Landing;
    if (landing_phase && contacts > 0 && !log.first_contact) log.first_contact = t;
    if (landing_phase && contacts == 4 && !log.all_contact) log.all_contact = t;
    bool td = false;
    if (fsm.mode == Mode::Landing) {
      // Mirrors the detector's qualifying window to record where it started.
      if (contacts == 4 && std::abs(state.V.z()) < TouchdownConfig{}.vertical_speed) {
        if (!window_xy) window_xy = state.P.head<2>();
      } else if (!touchdown.confirmed()) {
        window_xy.reset();
      }
      td = touchdown.update(t, contacts, state.V.z());
      if (td && !log.touchdown) {
        const double t0 = *touchdown.touchdown_time();
        log.touchdown = TouchdownEvent{t0, window_xy.value_or(Eigen::Vector2d(state.P.head<2>()))};
        touchdown_at = t;
      }
    }

    Command cmd = Command::None;
    if (!command_sent && t >= sc.command_time - 1e-12) {
      if (sc.kind == ScenarioKind::Landing) cmd = Command::FlyTo;
      if (sc.kind == ScenarioKind::Takeoff) cmd = Command::Takeoff;
      command_sent = cmd != Command::None || sc.kind == ScenarioKind::Idle;
    }
    FsmInputs in;
    in.clearance = diag.min_clearance();
    in.speed = state.V.norm();
    in.touchdown = td;
    in.dt = sc.dt;
    const FsmResult fr = fsm_step(fsm, in, cmd, fsm_cfg);
    const bool changed = fr.changed || first_step;
    if (fr.changed) mode_entry = t;
    fsm = fr.state;
    if (fr.changed && fsm.mode == Mode::TrajectoryPlanning && !log.plan_start) log.plan_start = t;
    first_step = false;

    ControlContext ctx;
    ctx.t = t;
    ctx.dt = sc.dt;
    ctx.mode = fsm.mode;
    ctx.mode_entry_time = mode_entry;
    ctx.mode_changed = changed;
    ctx.state = state;
    ctx.terrain = &terrain;
    ctx.params = &p;
    ctx.routing = fr.routing;
    ctx.wheels_in_contact = contacts;
    ctx.first_contact_time = log.first_contact;
    ctx.all_contact_time = log.all_contact;
    ctx.target.xy = sc.target;
    ctx.target.descent_speed = sc.descent_speed;
    if (fsm.mode == Mode::Transform || fsm.arms_folded) {
      ctx.front_fold = fsm.mode == Mode::Transform ? fsm.transform.front_fold() : 1.0;
      ctx.rear_fold = fsm.mode == Mode::Transform ? fsm.transform.rear_fold() : 1.0;
    } else {
      ctx.front_fold = ctx.rear_fold = 0.0;
    }
    try {
      u = controller->update(ctx);
    } catch (const Error& e) {
      log.diverged = true;
      log.error = std::string("controller failure: ") + e.what();
      break;
    }

    const bool airborne_mode = fsm.mode == Mode::Flying || fsm.mode == Mode::Hovering ||
                               fsm.mode == Mode::TrajectoryPlanning || fsm.mode == Mode::Landing;
    Vec3 dist = Vec3::Zero();
    if (airborne_mode && log.plan_start && !log.all_contact) dist = disturbance.force(t - *log.plan_start);

    if (k % sc.log_every == 0) {
      LogRow r;
      r.t = t;
      r.mode = fsm.mode;
      r.P = state.P;
      r.V = state.V;
      r.eta = state.eta;
      r.omega = state.omega;
      r.stroke = state.stroke;
      r.rotor = u.rotors.omega;
      for (int i = 0; i < 4; ++i) r.wheel[i] = diag.wheels[i].long_speed / p.chassis.wheel_radius;
      r.disturbance = dist;
      r.n_contact = contacts;
      log.rows.push_back(r);
    }
    if (touchdown_at && t - *touchdown_at >= sc.settle_time - 1e-12) break;
    if (k == steps) break;
    try {
      state = rk4_step(state, u, dist, terrain, p, cfg, t);
    } catch (const SimulationDiverged& e) {
      log.diverged = true;
      log.error = e.what();
      break;
    }
  }
  return log;
}

}  // namespace landair
