#pragma once

// Eight-mode state machine for driving, transforming, flying and landing,
// with actuator routing and the arm fold sequencing.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "landair/core.hpp"

namespace landair {

enum class Mode : int {
  Static = 0,
  Transform,
  Drive,
  Takeoff,
  Flying,
  Hovering,
  TrajectoryPlanning,
  Landing
};

inline constexpr std::array<Mode, 8> kAllModes{Mode::Static,  Mode::Transform, Mode::Drive,
                                               Mode::Takeoff, Mode::Flying,    Mode::Hovering,
                                               Mode::TrajectoryPlanning, Mode::Landing};

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Static: return "Static";
    case Mode::Transform: return "Transform";
    case Mode::Drive: return "Drive";
    case Mode::Takeoff: return "Takeoff";
    case Mode::Flying: return "Flying";
    case Mode::Hovering: return "Hovering";
    case Mode::TrajectoryPlanning: return "TrajectoryPlanning";
    case Mode::Landing: return "Landing";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : kAllModes) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

enum class Command { None, Takeoff, Land, Drive, Stop, FlyTo };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::None: return "None";
    case Command::Takeoff: return "Takeoff";
    case Command::Land: return "Land";
    case Command::Drive: return "Drive";
    case Command::Stop: return "Stop";
    case Command::FlyTo: return "FlyTo";
  }
  return "?";
}

/// Which actuator groups a mode may use.
struct Routing {
  bool rotors = false;
  bool wheel_drive = false;
  bool steering = false;
  bool servos = false;
  bool brakes = false;

  bool operator==(const Routing&) const = default;
};

inline Routing routing_for(Mode m) {
  Routing r;
  switch (m) {
    case Mode::Static: r.brakes = true; break;
    case Mode::Transform: r.servos = true; r.brakes = true; break;
    case Mode::Drive: r.wheel_drive = true; r.steering = true; break;
    case Mode::Takeoff:
    case Mode::Flying:
    case Mode::Hovering:
    case Mode::TrajectoryPlanning: r.rotors = true; break;
    case Mode::Landing: r.rotors = true; r.brakes = true; break;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Arm transform sequencing

enum class TransformDirection { ToDrive, ToFlight };

enum class TransformStage { Unlock, FoldRear, FoldFront, UnfoldFront, UnfoldRear, Lock, Done };

inline std::string_view to_string(TransformStage s) {
  switch (s) {
    case TransformStage::Unlock: return "Unlock";
    case TransformStage::FoldRear: return "FoldRear";
    case TransformStage::FoldFront: return "FoldFront";
    case TransformStage::UnfoldFront: return "UnfoldFront";
    case TransformStage::UnfoldRear: return "UnfoldRear";
    case TransformStage::Lock: return "Lock";
    case TransformStage::Done: return "Done";
  }
  return "?";
}

/// Progress values count along the transform direction: 0 at the start
/// configuration, 1 when the pair has reached the target configuration.
struct TransformPhase {
  TransformDirection direction = TransformDirection::ToFlight;
  TransformStage stage = TransformStage::Unlock;
  double front = 0.0;
  double rear = 0.0;
  double lock_timer = 0.0;  // s spent in the current Unlock/Lock stage

  bool done() const { return stage == TransformStage::Done; }

  /// Fold fraction of each pair (0 deployed, 1 folded).
  double front_fold() const { return direction == TransformDirection::ToDrive ? front : 1.0 - front; }
  double rear_fold() const { return direction == TransformDirection::ToDrive ? rear : 1.0 - rear; }
};

struct TransformConfig {
  double pair_time = 2.0;  // s for a full fold of one arm pair
  double lock_time = 0.2;  // s for unlock and for lock
};

/// Throws OrderingViolation when the arm ordering rule is broken: rear
/// before front when folding, front before rear when unfolding.
inline void check_ordering(const TransformPhase& ph) {
  auto bad = [](double v) { return !(v >= 0.0 && v <= 1.0); };
  if (bad(ph.front) || bad(ph.rear)) throw OrderingViolation("transform progress outside [0, 1]");
  if (ph.direction == TransformDirection::ToDrive && ph.front > 0.0 && ph.rear < 1.0) {
    throw OrderingViolation("front arms moved before rear arms finished folding");
  }
  if (ph.direction == TransformDirection::ToFlight && ph.rear > 0.0 && ph.front < 1.0) {
    throw OrderingViolation("rear arms moved before front arms finished unfolding");
  }
}

inline TransformPhase start_transform(TransformDirection dir) {
  TransformPhase ph;
  ph.direction = dir;
  ph.stage = TransformStage::Unlock;
  return ph;
}

/// Advances servo progress at the configured rate. Returns the new phase;
/// `done()` on the result is the arms-locked event.
inline TransformPhase transform_step(TransformPhase ph, double dt, const TransformConfig& cfg = {}) {
  check_ordering(ph);
  if (!(dt >= 0.0)) throw InvalidArgument("transform_step: negative dt");
  const double rate = 1.0 / cfg.pair_time;
  const bool to_drive = ph.direction == TransformDirection::ToDrive;
  double left = dt;
  while (left > 0.0 && !ph.done()) {
    switch (ph.stage) {
      case TransformStage::Unlock:
      case TransformStage::Lock: {
        const double need = cfg.lock_time - ph.lock_timer;
        if (left < need) {
          ph.lock_timer += left;
          left = 0.0;
        } else {
          left -= need;
          ph.lock_timer = 0.0;
          ph.stage = ph.stage == TransformStage::Lock
                         ? TransformStage::Done
                         : (to_drive ? TransformStage::FoldRear : TransformStage::UnfoldFront);
        }
        break;
      }
      case TransformStage::FoldRear:
      case TransformStage::UnfoldRear:
      case TransformStage::FoldFront:
      case TransformStage::UnfoldFront: {
        const bool rear = ph.stage == TransformStage::FoldRear || ph.stage == TransformStage::UnfoldRear;
        double& prog = rear ? ph.rear : ph.front;
        const double need = (1.0 - prog) / rate;
        if (left < need) {
          prog += left * rate;
          left = 0.0;
        } else {
          left -= need;
          prog = 1.0;
          const bool first_pair = (to_drive && rear) || (!to_drive && !rear);
          if (first_pair) {
            ph.stage = to_drive ? TransformStage::FoldFront : TransformStage::UnfoldRear;
          } else {
            ph.stage = TransformStage::Lock;
          }
        }
        break;
      }
      case TransformStage::Done: break;
    }
  }
  check_ordering(ph);
  return ph;
}

// ---------------------------------------------------------------------------
// Touchdown detection

struct TouchdownConfig {
  double window = 0.2;           // s
  double vertical_speed = 0.05;  // m/s
};

/// Confirms touchdown once all four wheels have been in contact with small
/// vertical CoM speed for a whole window.
class TouchdownDetector {
 public:
  explicit TouchdownDetector(TouchdownConfig cfg = {}) : cfg_(cfg) {}

  /// Feeds one sample; returns true once touchdown is confirmed.
  bool update(double t, int wheels_in_contact, double vertical_speed) {
    if (confirmed_) return true;
    if (wheels_in_contact == 4 && std::abs(vertical_speed) < cfg_.vertical_speed) {
      if (!start_) start_ = t;
      if (t - *start_ >= cfg_.window - 1e-9) confirmed_ = true;
    } else {
      start_.reset();
    }
    return confirmed_;
  }
  bool confirmed() const { return confirmed_; }
  /// Start of the qualifying window.
  std::optional<double> touchdown_time() const { return confirmed_ ? start_ : std::nullopt; }
  void reset() {
    start_.reset();
    confirmed_ = false;
  }

 private:
  TouchdownConfig cfg_;
  std::optional<double> start_;
  bool confirmed_ = false;
};

// ---------------------------------------------------------------------------
// Mode transitions

struct FsmConfig {
  double flying_clearance = 0.5;   // Takeoff -> Flying, m above terrain
  double landing_clearance = 0.25; // TrajectoryPlanning -> Landing
  double settle_speed = 0.1;       // Flying -> Hovering, m/s
  TransformConfig transform;
};

struct FsmState {
  Mode mode = Mode::Static;
  bool arms_folded = false;
  TransformPhase transform;
  Mode transform_target = Mode::Static;
  Mode after_landing = Mode::Static;
};

/// Sensor-derived inputs to a step.
struct FsmInputs {
  double clearance = 0.0;      // lowest wheel above terrain, m
  double speed = 0.0;          // CoM speed, m/s
  bool touchdown = false;      // confirmed by the touchdown detector
  bool plan_finished = false;  // trajectory reference exhausted
  double dt = 0.0;             // for servo progress
};

struct FsmResult {
  FsmState state;
  Routing routing;
  bool accepted = true;  // false when a command had no edge from the mode
  bool changed = false;
};

namespace detail {

inline bool accepts(Mode m, Command c) {
  switch (c) {
    case Command::None: return true;
    case Command::Takeoff:
      return m == Mode::Static || m == Mode::Drive || m == Mode::Landing;
    case Command::Drive: return m == Mode::Static || m == Mode::Landing;
    case Command::Stop:
      return m == Mode::Drive || m == Mode::Flying || m == Mode::TrajectoryPlanning;
    case Command::Land:
      return m == Mode::Takeoff || m == Mode::Flying || m == Mode::Hovering ||
             m == Mode::TrajectoryPlanning;
    case Command::FlyTo: return m == Mode::Flying || m == Mode::Hovering;
  }
  return false;
}

}  // namespace detail

/// One deterministic transition. Commands without an edge are rejected and
/// leave the state untouched; automatic transitions still run.
inline FsmResult fsm_step(const FsmState& in, const FsmInputs& x, Command cmd = Command::None,
                          const FsmConfig& cfg = {}) {
  FsmResult r;
  r.state = in;
  FsmState& s = r.state;
  r.accepted = detail::accepts(in.mode, cmd);
  if (!r.accepted) cmd = Command::None;

  auto go_transform = [&](TransformDirection dir, Mode target) {
    s.mode = Mode::Transform;
    s.transform = start_transform(dir);
    s.transform_target = target;
  };

  switch (in.mode) {
    case Mode::Static:
      if (cmd == Command::Takeoff) {
        if (s.arms_folded) go_transform(TransformDirection::ToFlight, Mode::Takeoff);
        else s.mode = Mode::Takeoff;
      } else if (cmd == Command::Drive) {
        if (s.arms_folded) s.mode = Mode::Drive;
        else go_transform(TransformDirection::ToDrive, Mode::Drive);
      }
      break;
    case Mode::Transform:
      s.transform = transform_step(s.transform, x.dt, cfg.transform);
      if (s.transform.done()) {
        s.arms_folded = s.transform.direction == TransformDirection::ToDrive;
        s.mode = s.transform_target;
      }
      break;
    case Mode::Drive:
      if (cmd == Command::Stop) s.mode = Mode::Static;
      else if (cmd == Command::Takeoff) {
        if (s.arms_folded) go_transform(TransformDirection::ToFlight, Mode::Takeoff);
        else s.mode = Mode::Takeoff;
      }
      break;
    case Mode::Takeoff:
      if (cmd == Command::Land) s.mode = Mode::Landing;
      else if (x.clearance > cfg.flying_clearance) s.mode = Mode::Flying;
      break;
    case Mode::Flying:
      if (cmd == Command::FlyTo) s.mode = Mode::TrajectoryPlanning;
      else if (cmd == Command::Land) s.mode = Mode::Landing;
      else if (cmd == Command::Stop || x.speed < cfg.settle_speed) s.mode = Mode::Hovering;
      break;
    case Mode::Hovering:
      if (cmd == Command::FlyTo) s.mode = Mode::TrajectoryPlanning;
      else if (cmd == Command::Land) s.mode = Mode::Landing;
      break;
    case Mode::TrajectoryPlanning:
      if (cmd == Command::Stop) s.mode = Mode::Hovering;
      else if (cmd == Command::Land || x.clearance < cfg.landing_clearance) s.mode = Mode::Landing;
      break;
    case Mode::Landing:
      if (cmd == Command::Drive) s.after_landing = Mode::Drive;
      else if (cmd == Command::Takeoff) s.after_landing = Mode::Takeoff;
      if (x.touchdown) {
        const Mode next = s.after_landing;
        s.after_landing = Mode::Static;
        if (next == Mode::Drive && !s.arms_folded) go_transform(TransformDirection::ToDrive, Mode::Drive);
        else s.mode = next;
      }
      break;
  }
  r.changed = s.mode != in.mode;
  r.routing = routing_for(s.mode);
  return r;
}

}  // namespace landair
