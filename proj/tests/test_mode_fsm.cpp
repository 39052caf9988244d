#include <gtest/gtest.h>

#include <map>
#include <queue>
#include <set>

#include "landair/mode_fsm.hpp"
#include "landair/sim_engine.hpp"
#include "support/generators.hpp"

using namespace landair;
using landair::testing::Gen;

namespace {

constexpr std::array<Command, 6> kCommands{Command::None, Command::Takeoff, Command::Land,
                                           Command::Drive, Command::Stop,    Command::FlyTo};

FsmState in_mode(Mode m, bool folded = false) {
  FsmState s;
  s.mode = m;
  s.arms_folded = folded;
  return s;
}

bool same(const FsmState& a, const FsmState& b) {
  return a.mode == b.mode && a.arms_folded == b.arms_folded && a.transform_target == b.transform_target &&
         a.after_landing == b.after_landing && a.transform.stage == b.transform.stage &&
         a.transform.direction == b.transform.direction && a.transform.front == b.transform.front &&
         a.transform.rear == b.transform.rear && a.transform.lock_timer == b.transform.lock_timer;
}

FsmInputs random_inputs(Gen& gen) {
  FsmInputs x;
  x.clearance = gen.coin(0.2) ? 0.5 : gen.uniform(-0.05, 1.5);
  x.speed = gen.uniform(0.0, 2.0);
  x.touchdown = gen.coin(0.2);
  x.plan_finished = gen.coin(0.2);
  x.dt = gen.coin(0.1) ? gen.uniform(0.0, 3.0) : gen.uniform(0.0, 0.05);
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// Transitions

TEST(FsmStep, TakeoffWithFoldedArmsUnfoldsFirst) {
  const auto r = fsm_step(in_mode(Mode::Static, true), {}, Command::Takeoff);
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.state.mode, Mode::Transform);
  EXPECT_EQ(r.state.transform.direction, TransformDirection::ToFlight);
  EXPECT_EQ(r.state.transform_target, Mode::Takeoff);
  EXPECT_EQ(r.routing, routing_for(Mode::Transform));
}

TEST(FsmStep, TakeoffWithDeployedArmsGoesStraightToTakeoff) {
  const auto r = fsm_step(in_mode(Mode::Static, false), {}, Command::Takeoff);
  EXPECT_EQ(r.state.mode, Mode::Takeoff);
  EXPECT_TRUE(r.changed);
}

TEST(FsmStep, TakeoffBecomesFlyingAboveHalfAMetre) {
  FsmInputs x;
  x.clearance = 0.51;
  EXPECT_EQ(fsm_step(in_mode(Mode::Takeoff), x).state.mode, Mode::Flying);
  x.clearance = 0.5;
  EXPECT_EQ(fsm_step(in_mode(Mode::Takeoff), x).state.mode, Mode::Takeoff);
  x.clearance = 0.49;
  EXPECT_EQ(fsm_step(in_mode(Mode::Takeoff), x).state.mode, Mode::Takeoff);
}

TEST(FsmStep, HoveringWithoutCommandStays) {
  FsmInputs x;
  x.clearance = 2.0;
  const auto r = fsm_step(in_mode(Mode::Hovering), x);
  EXPECT_EQ(r.state.mode, Mode::Hovering);
  EXPECT_FALSE(r.changed);
  EXPECT_TRUE(r.accepted);
}

TEST(FsmStep, CommandWithoutEdgeIsRejected) {
  const auto r = fsm_step(in_mode(Mode::Static), {}, Command::Land);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.state.mode, Mode::Static);
  EXPECT_FALSE(fsm_step(in_mode(Mode::Drive), {}, Command::FlyTo).accepted);
  EXPECT_FALSE(fsm_step(in_mode(Mode::Transform), {}, Command::Takeoff).accepted);
}

TEST(FsmStep, LandingExitsOnConfirmedTouchdownOnly) {
  FsmInputs x;
  x.clearance = 0.0;
  EXPECT_EQ(fsm_step(in_mode(Mode::Landing), x).state.mode, Mode::Landing);
  x.touchdown = true;
  EXPECT_EQ(fsm_step(in_mode(Mode::Landing), x).state.mode, Mode::Static);

  // A queued follow-up command is applied at touchdown.
  FsmInputs air;
  auto s = fsm_step(in_mode(Mode::Landing), air, Command::Takeoff).state;
  EXPECT_EQ(s.mode, Mode::Landing);
  EXPECT_EQ(fsm_step(s, x).state.mode, Mode::Takeoff);
  s = fsm_step(in_mode(Mode::Landing), air, Command::Drive).state;
  const auto r = fsm_step(s, x);
  EXPECT_EQ(r.state.mode, Mode::Transform);
  EXPECT_EQ(r.state.transform_target, Mode::Drive);
}

TEST(FsmStep, FlightLegsFollowTheEdgeSet) {
  FsmInputs x;
  x.clearance = 2.0;
  x.speed = 1.0;
  EXPECT_EQ(fsm_step(in_mode(Mode::Flying), x).state.mode, Mode::Flying);
  EXPECT_EQ(fsm_step(in_mode(Mode::Flying), x, Command::FlyTo).state.mode, Mode::TrajectoryPlanning);
  EXPECT_EQ(fsm_step(in_mode(Mode::Hovering), x, Command::Land).state.mode, Mode::Landing);
  x.speed = 0.05;
  EXPECT_EQ(fsm_step(in_mode(Mode::Flying), x).state.mode, Mode::Hovering);
  x.clearance = 0.2;
  EXPECT_EQ(fsm_step(in_mode(Mode::TrajectoryPlanning), x).state.mode, Mode::Landing);
}

TEST(Routing, TableMatchesActuatorGroups) {
  EXPECT_TRUE(routing_for(Mode::Drive).wheel_drive);
  EXPECT_TRUE(routing_for(Mode::Drive).steering);
  EXPECT_FALSE(routing_for(Mode::Drive).rotors);
  for (Mode m : {Mode::Takeoff, Mode::Flying, Mode::Hovering, Mode::TrajectoryPlanning, Mode::Landing}) {
    EXPECT_TRUE(routing_for(m).rotors);
    EXPECT_FALSE(routing_for(m).wheel_drive);
    EXPECT_FALSE(routing_for(m).servos);
  }
  EXPECT_TRUE(routing_for(Mode::Transform).servos);
  EXPECT_FALSE(routing_for(Mode::Transform).rotors);
  EXPECT_FALSE(routing_for(Mode::Transform).wheel_drive);
  EXPECT_FALSE(routing_for(Mode::Static).rotors);
  EXPECT_FALSE(routing_for(Mode::Static).wheel_drive);
}

TEST(Modes, NamesRoundTrip) {
  for (Mode m : kAllModes) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_FALSE(parse_mode("Swimming").has_value());
}

// ---------------------------------------------------------------------------
// Transform sequencing

TEST(TransformStep, LinearServoRate) {
  TransformPhase ph = start_transform(TransformDirection::ToDrive);
  ph.stage = TransformStage::FoldRear;
  ph = transform_step(ph, 0.5);
  EXPECT_DOUBLE_EQ(ph.rear, 0.25);
  EXPECT_DOUBLE_EQ(ph.front, 0.0);
  ph = transform_step(ph, 0.5);
  EXPECT_DOUBLE_EQ(ph.rear, 0.5);
}

TEST(TransformStep, CompletesWithArmsLockedEvent) {
  TransformPhase ph = start_transform(TransformDirection::ToDrive);
  ph.stage = TransformStage::Lock;
  ph.front = ph.rear = 1.0;
  ph = transform_step(ph, 0.2);
  EXPECT_TRUE(ph.done());
  // Whole sequence: 0.2 unlock + 2 x 2.0 s + 0.2 lock.
  TransformPhase full = start_transform(TransformDirection::ToFlight);
  full = transform_step(full, 4.39);
  EXPECT_FALSE(full.done());
  full = transform_step(full, 0.02);
  EXPECT_TRUE(full.done());
  EXPECT_DOUBLE_EQ(full.front_fold(), 0.0);
  EXPECT_DOUBLE_EQ(full.rear_fold(), 0.0);
}

TEST(TransformStep, OrderingBreachIsAnError) {
  TransformPhase ph = start_transform(TransformDirection::ToDrive);
  ph.stage = TransformStage::FoldFront;
  ph.front = 0.1;
  ph.rear = 0.5;
  EXPECT_THROW(transform_step(ph, 0.01), OrderingViolation);
  TransformPhase up = start_transform(TransformDirection::ToFlight);
  up.rear = 0.2;
  up.front = 0.9;
  EXPECT_THROW(check_ordering(up), OrderingViolation);
  EXPECT_THROW(transform_step(start_transform(TransformDirection::ToDrive), -1.0), InvalidArgument);
}

TEST(TransformStep, OrderingHoldsAtEverySubstep) {
  Gen gen(71);
  for (auto dir : {TransformDirection::ToDrive, TransformDirection::ToFlight}) {
    for (int k = 0; k < 200; ++k) {
      TransformPhase ph = start_transform(dir);
      double prev_front = ph.front_fold(), prev_rear = ph.rear_fold();
      while (!ph.done()) {
        ph = transform_step(ph, gen.uniform(0.0, 0.3));
        EXPECT_NO_THROW(check_ordering(ph));
        // Fold fractions move monotonically toward the target.
        if (dir == TransformDirection::ToDrive) {
          EXPECT_GE(ph.front_fold(), prev_front);
          EXPECT_GE(ph.rear_fold(), prev_rear);
        } else {
          EXPECT_LE(ph.front_fold(), prev_front);
          EXPECT_LE(ph.rear_fold(), prev_rear);
        }
        prev_front = ph.front_fold();
        prev_rear = ph.rear_fold();
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Touchdown detection

TEST(Touchdown, AirborneIsNeverTouchdown) {
  TouchdownDetector d;
  for (int k = 0; k <= 1000; ++k) EXPECT_FALSE(d.update(k * 1e-3, 0, 0.0));
}

TEST(Touchdown, RestingOnSlopeConfirmsAfterTheWindow) {
  const RobotParams p;
  const Terrain terrain(deg2rad(30.0));
  const SimConfig cfg;
  RobotState s = rest_state(1.0, 0.0, terrain, p, cfg);
  TouchdownDetector d;
  const ControlInput u = [] {
    ControlInput c;
    c.brake = true;
    return c;
  }();
  std::optional<double> confirmed_at;
  for (int k = 0; k <= 1000 && !confirmed_at; ++k) {
    const double t = k * cfg.dt;
    const auto diag = diagnose(s, u, terrain, p, cfg);
    if (d.update(t, diag.contacts(), s.V.z())) confirmed_at = t;
    s = rk4_step(s, u, Vec3::Zero(), terrain, p, cfg, t);
  }
  ASSERT_TRUE(confirmed_at.has_value());
  EXPECT_GE(*confirmed_at, 0.2 - 1e-9);
  EXPECT_LE(*confirmed_at, 0.25);
}

TEST(Touchdown, SingleWheelBounceIsNotTouchdown) {
  // Drop the body rolled so one side strikes first, with rotors carrying
  // most of the weight; replay the first 0.4 s of contact history.
  const RobotParams p;
  const Terrain terrain;
  const SimConfig cfg;
  RobotState s = hover_state({0.0, 0.0, touch_height(p) + 0.08}, p);
  s.eta.phi = 0.25;
  s.V.z() = -0.3;
  ControlInput u;
  u.rotors = RotorSpeeds::uniform(0.97 * hover_rotor_speed(p));
  TouchdownDetector d;
  int max_contacts = 0, steps_with_contact = 0;
  for (int k = 0; k < 400; ++k) {
    const double t = k * cfg.dt;
    const auto diag = diagnose(s, u, terrain, p, cfg);
    max_contacts = std::max(max_contacts, diag.contacts());
    steps_with_contact += diag.contacts() > 0 ? 1 : 0;
    EXPECT_FALSE(d.update(t, diag.contacts(), s.V.z())) << "t = " << t;
    s = rk4_step(s, u, Vec3::Zero(), terrain, p, cfg, t);
  }
  EXPECT_GT(steps_with_contact, 0);
  EXPECT_LT(max_contacts, 4);
}

TEST(Touchdown, InterruptedWindowRestarts) {
  TouchdownDetector d;
  for (int k = 0; k < 150; ++k) EXPECT_FALSE(d.update(k * 1e-3, 4, 0.0));
  EXPECT_FALSE(d.update(0.150, 3, 0.0));
  for (int k = 151; k < 351; ++k) EXPECT_FALSE(d.update(k * 1e-3, 4, 0.0));
  EXPECT_TRUE(d.update(0.351, 4, 0.0));
  EXPECT_NEAR(*d.touchdown_time(), 0.151, 1e-12);
  EXPECT_FALSE(TouchdownDetector().update(0.0, 4, 0.06));
}

// ---------------------------------------------------------------------------
// Properties

TEST(FsmProperties, Deterministic) {
  Gen gen(72);
  for (int k = 0; k < 20000; ++k) {
    FsmState s = in_mode(kAllModes[gen.integer(0, 7)], gen.coin());
    if (s.mode == Mode::Transform) {
      s.transform = start_transform(gen.coin() ? TransformDirection::ToDrive : TransformDirection::ToFlight);
      s.transform_target = gen.coin() ? Mode::Drive : Mode::Takeoff;
    }
    const FsmInputs x = random_inputs(gen);
    const Command c = kCommands[gen.integer(0, 5)];
    const auto a = fsm_step(s, x, c), b = fsm_step(s, x, c);
    ASSERT_TRUE(same(a.state, b.state));
    ASSERT_EQ(a.accepted, b.accepted);
    ASSERT_EQ(a.routing, b.routing);
  }
}

TEST(FsmProperties, EveryModeReachableFromStaticAndBack) {
  // Abstract state: (mode, arms folded). Transform is driven to completion
  // with a long dt.
  using Key = std::pair<Mode, bool>;
  std::vector<FsmInputs> inputs;
  for (double c : {0.0, 0.3, 0.6}) {
    for (double v : {0.0, 1.0}) {
      for (bool td : {false, true}) inputs.push_back({c, v, td, false, 10.0});
    }
  }
  auto successors = [&](const FsmState& s) {
    std::vector<FsmState> out;
    for (const auto& x : inputs) {
      for (Command c : kCommands) out.push_back(fsm_step(s, x, c).state);
    }
    return out;
  };
  std::map<Key, FsmState> seen;
  std::map<Key, std::set<Key>> edges;
  std::queue<FsmState> q;
  for (bool folded : {false, true}) {
    seen[{Mode::Static, folded}] = in_mode(Mode::Static, folded);
    q.push(in_mode(Mode::Static, folded));
  }
  while (!q.empty()) {
    const FsmState s = q.front();
    q.pop();
    for (const auto& n : successors(s)) {
      const Key k{n.mode, n.arms_folded};
      edges[{s.mode, s.arms_folded}].insert(k);
      if (!seen.count(k)) {
        seen[k] = n;
        q.push(n);
      }
    }
  }
  std::set<Mode> reached;
  for (const auto& [k, s] : seen) reached.insert(k.first);
  EXPECT_EQ(reached.size(), kAllModes.size());
  // Reverse reachability to Static.
  for (const auto& [start, s] : seen) {
    std::set<Key> visited{start};
    std::queue<Key> w;
    w.push(start);
    bool back = false;
    while (!w.empty() && !back) {
      const Key k = w.front();
      w.pop();
      if (k.first == Mode::Static) back = true;
      for (const auto& n : edges[k]) {
        if (visited.insert(n).second) w.push(n);
      }
    }
    EXPECT_TRUE(back) << to_string(start.first);
  }
}

TEST(FsmProperties, EventFuzzingKeepsInvariants) {
  Gen gen(73);
  long steps = 0;
  for (int seq = 0; seq < 100000; ++seq) {
    FsmState s = in_mode(Mode::Static, gen.coin());
    const int len = gen.integer(1, 40);
    for (int k = 0; k < len; ++k, ++steps) {
      const FsmInputs x = random_inputs(gen);
      const Command c = kCommands[gen.integer(0, 5)];
      const FsmState before = s;
      const auto r = fsm_step(s, x, c);
      s = r.state;
      ASSERT_FALSE(r.routing.rotors && r.routing.wheel_drive) << "seq " << seq;
      ASSERT_EQ(r.routing, routing_for(s.mode));
      ASSERT_NO_THROW(check_ordering(s.transform));
      // The 0.5 m edge: Takeoff leaves for Flying exactly when clear of it.
      if (before.mode == Mode::Takeoff && r.accepted && c != Command::Land) {
        ASSERT_EQ(s.mode == Mode::Flying, x.clearance > 0.5) << "seq " << seq;
      }
      if (s.mode == Mode::Flying && before.mode != Mode::Flying) {
        ASSERT_EQ(before.mode, Mode::Takeoff);
      }
      // No transform in the air.
      if (s.mode == Mode::Transform && before.mode != Mode::Transform) {
        ASSERT_TRUE(before.mode == Mode::Static || before.mode == Mode::Drive || before.mode == Mode::Landing);
        ASSERT_TRUE(before.mode != Mode::Landing || x.touchdown);
      }
      // Flight modes always have deployed arms.
      if (routing_for(s.mode).rotors) {
        ASSERT_FALSE(s.arms_folded);
      }
      // A rejected command acts like no command.
      if (!r.accepted) {
        ASSERT_TRUE(same(s, fsm_step(before, x).state));
      }
    }
  }
  EXPECT_GT(steps, 1000000);
}
