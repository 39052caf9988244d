#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "landair/chassis_dynamics.hpp"
#include "landair/ground_effect.hpp"
#include "landair/params.hpp"
#include "support/generators.hpp"

using namespace landair;
using landair::testing::Gen;

namespace {

TireParams fixed_peak(double D) {
  TireParams tp;
  tp.load_scaled = false;
  tp.D = D;
  return tp;
}

// RK4 on the quarter-car with constant inputs.
SuspensionState integrate(SuspensionState s, double q, double dt, int steps, const SuspensionParams& sp) {
  auto f = [&](const Vec4& x) {
    SuspensionState t{x[0], x[1], x[2], x[3], q};
    return suspension_derivs(t, 0.0, 0.0, q, sp);
  };
  Vec4 x = s.vec();
  for (int k = 0; k < steps; ++k) {
    const Vec4 k1 = f(x), k2 = f(x + 0.5 * dt * k1), k3 = f(x + 0.5 * dt * k2), k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return {x[0], x[1], x[2], x[3], q};
}

}  // namespace

// ---------------------------------------------------------------------------
// Tires

TEST(TireLateralForce, ZeroSlipGivesZero) {
  EXPECT_EQ(tire_lateral_force(0.0, 500.0, TireParams{}), 0.0);
}

TEST(TireLateralForce, FixedPeakExample) {
  const auto ref = landair::testing::load_json("derived_values.json");
  const double fy = tire_lateral_force(0.05, 0.0, fixed_peak(1000.0));
  EXPECT_NEAR(fy, ref["magic_formula_alpha_0.05"].get<double>(), 1e-9);
  // Load-scaled peak with mu * F_N = 1000 N gives the same force.
  EXPECT_NEAR(tire_lateral_force(0.05, 1000.0 / 0.9, TireParams{}), fy, 1e-9);
}

TEST(TireLateralForce, OddAndBounded) {
  Gen gen(41);
  for (int k = 0; k < 5000; ++k) {
    TireParams tp;
    tp.B = gen.uniform(2, 20);
    tp.C = gen.uniform(0.5, 2.0);
    tp.E = gen.uniform(-1.0, 1.0);
    tp.mu = gen.uniform(0.2, 1.2);
    const double load = gen.uniform(0, 2000);
    const double alpha = gen.uniform(-1.5, 1.5);
    const double f = tire_lateral_force(alpha, load, tp);
    EXPECT_NEAR(tire_lateral_force(-alpha, load, tp), -f, 1e-9);
    // The shape factor reaches the peak when C >= 1.
    const double D = tp.peak(load);
    const double bound = tp.C >= 1.0 ? D : D * std::sin(tp.C * kPi / 2.0);
    EXPECT_LE(std::abs(f), bound + 1e-9);
  }
}

TEST(TireLateralForce, NegativeLoadRejected) {
  EXPECT_THROW(tire_lateral_force(0.1, -1.0, TireParams{}), InvalidArgument);
}

TEST(FrictionEllipse, InsideUnchanged) {
  const auto [fx, fy] = friction_ellipse_clamp(100.0, -200.0, 1000.0, 0.9);
  EXPECT_EQ(fx, 100.0);
  EXPECT_EQ(fy, -200.0);
}

TEST(FrictionEllipse, SaturatedLongitudinalLeavesNoLateral) {
  const auto [fx, fy] = friction_ellipse_clamp(450.0, 300.0, 500.0, 0.9);
  EXPECT_EQ(fx, 450.0);
  EXPECT_EQ(fy, 0.0);
}

TEST(FrictionEllipse, ThreeFourFiveTriangle) {
  const auto [fx, fy] = friction_ellipse_clamp(300.0, 900.0, 500.0, 1.0);
  EXPECT_EQ(fx, 300.0);
  EXPECT_EQ(fy, 400.0);
  EXPECT_EQ(friction_ellipse_clamp(300.0, -900.0, 500.0, 1.0).second, -400.0);
}

TEST(FrictionEllipse, ResultAlwaysInsideEllipse) {
  Gen gen(42);
  for (int k = 0; k < 20000; ++k) {
    const double FN = gen.uniform(0, 3000), mu = gen.uniform(0.1, 1.5);
    const auto [fx, fy] = friction_ellipse_clamp(gen.uniform(-5000, 5000), gen.uniform(-5000, 5000), FN, mu);
    EXPECT_LE(fx * fx + fy * fy, (mu * FN) * (mu * FN) + 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Suspension

TEST(TireNormalLoad, StaticRestGivesWeightShare) {
  const SuspensionParams sp;
  EXPECT_NEAR(tire_normal_load({}, sp), (sp.m_s + sp.m_u) * kGravity, 1e-12);
}

TEST(TireNormalLoad, LiftedWheelCarriesNothing) {
  const SuspensionParams sp;
  EXPECT_EQ(tire_normal_load({0.1, 0.0, 0.1, 0.0, 0.0}, sp), 0.0);
}

TEST(TireNormalLoad, RoadStepSettlesToStaticSolve) {
  const SuspensionParams sp;
  const double q = 0.01;
  const auto ss = suspension_state_space(sp);
  // Linear static solve A x + B_road q = 0.
  const Vec4 x_static = -ss.A.fullPivLu().solve(ss.B_road * q);
  EXPECT_NEAR(x_static[0], q, 1e-12);
  EXPECT_NEAR(x_static[2], q, 1e-12);

  SuspensionState s;
  s.q = q;
  // Immediately after the step the tire is compressed by q.
  EXPECT_NEAR(tire_normal_load(s, sp) - (sp.m_s + sp.m_u) * kGravity, sp.K2 * q, 1e-9);
  const auto settled = integrate(s, q, 1e-4, 40000, sp);
  EXPECT_NEAR(settled.z_s, x_static[0], 1e-8);
  EXPECT_NEAR(settled.z_u, x_static[2], 1e-8);
  EXPECT_NEAR(tire_normal_load(settled, sp), (sp.m_s + sp.m_u) * kGravity, 1e-4);
}

TEST(SuspensionDerivs, OriginIsEquilibrium) {
  EXPECT_EQ(suspension_derivs({}, 0.0, 0.0, 0.0, SuspensionParams{}), Vec4::Zero());
}

TEST(SuspensionStateSpace, SprungFrequencyMatchesEigenvalues) {
  SuspensionParams sp;
  sp.m_s = 5.0;
  sp.K1 = 20000.0;
  sp.K2 = 1.0e8;  // rigid tire isolates the sprung mode
  sp.B1 = 1.0;
  sp.B2 = 1.0;
  const auto ref = landair::testing::load_json("derived_values.json");
  const double f_ref = ref["sprung_frequency_hz"].get<double>();
  EXPECT_NEAR(f_ref, std::sqrt(20000.0 / 5.0) / (2 * kPi), 0.01);

  const auto ev = Eigen::EigenSolver<Mat4>(suspension_state_space(sp).A).eigenvalues();
  double f_low = 1e9;
  for (int i = 0; i < 4; ++i) {
    if (ev[i].imag() > 0) f_low = std::min(f_low, ev[i].imag() / (2 * kPi));
  }
  EXPECT_NEAR(f_low, f_ref, 1e-6);

  // The same frequency shows up in the impulse response.
  SuspensionState s;
  s.zdot_s = 1.0;
  const double dt = 1e-5;
  std::vector<double> crossings;
  double prev = s.z_s;
  for (int k = 1; k <= 60000 && crossings.size() < 9; ++k) {
    s = integrate(s, 0.0, dt, 1, sp);
    if ((prev < 0.0) != (s.z_s < 0.0) && k > 1) crossings.push_back(k * dt);
    prev = s.z_s;
  }
  ASSERT_GE(crossings.size(), 9u);
  const double period = (crossings[8] - crossings[0]) / 4.0;
  EXPECT_NEAR(1.0 / period, f_ref, 0.01 * f_ref);
}

TEST(SuspensionStateSpace, HurwitzForPositiveParameters) {
  Gen gen(43);
  for (int k = 0; k < 2000; ++k) {
    SuspensionParams sp;
    sp.m_s = gen.uniform(0.5, 20);
    sp.m_u = gen.uniform(0.1, 5);
    sp.K1 = gen.uniform(100, 1e5);
    sp.K2 = gen.uniform(1e3, 1e6);
    sp.B1 = gen.uniform(0.1, 1000);
    sp.B2 = gen.uniform(0.1, 1000);
    const auto ev = Eigen::EigenSolver<Mat4>(suspension_state_space(sp).A).eigenvalues();
    EXPECT_LT(ev.real().maxCoeff(), 0.0);
  }
}

TEST(SuspensionEnergy, NonIncreasingWithoutInputs) {
  Gen gen(44);
  const SuspensionParams sp;
  for (int trial = 0; trial < 20; ++trial) {
    SuspensionState s{gen.uniform(-0.02, 0.02), gen.uniform(-1, 1), gen.uniform(-0.01, 0.01), gen.uniform(-1, 1), 0.0};
    double e = suspension_energy(s, sp);
    for (int k = 0; k < 2000; ++k) {
      s = integrate(s, 0.0, 1e-4, 1, sp);
      const double en = suspension_energy(s, sp);
      EXPECT_LE(en, e * (1.0 + 1e-9) + 1e-15);
      e = en;
    }
  }
}

// ---------------------------------------------------------------------------
// Planar chassis

TEST(ChassisAccel, NoForcesNoMotion) {
  const ChassisParams cp;
  const auto a = chassis_accel_from_wheel_forces({}, {0, 0, 0, 0}, {0, 0, 0, 0}, {}, cp);
  EXPECT_EQ(a.a_x, 0.0);
  EXPECT_EQ(a.a_y, 0.0);
  EXPECT_EQ(a.psi_dd, 0.0);
}

TEST(ChassisAccel, SymmetricDriveLeavesOnlyYawInput) {
  const ChassisParams cp;
  ChassisInputs in;
  in.U4 = 3.0;
  const auto a = chassis_accel_from_wheel_forces({}, {40, 40, 25, 25}, {0, 0, 0, 0}, in, cp);
  EXPECT_NEAR(a.psi_dd, 3.0 / cp.J_z, 1e-12);
}

TEST(ChassisAccel, DriveBalancesDragAtSpeed) {
  const ChassisParams cp;
  const double v = 2.0;
  const double drag = 0.5 * cp.rho * cp.c_w * cp.A * v * v;
  const auto a = chassis_accel_from_wheel_forces({v, 0, 0}, {drag / 4, drag / 4, drag / 4, drag / 4}, {0, 0, 0, 0},
                                                 {}, cp);
  EXPECT_NEAR(a.a_x, 0.0, 1e-12);
}

TEST(ChassisPlanar, ConstantSteerAndTorqueReachSteadyYawRate) {
  const ChassisParams cp;
  const TireParams tp;
  const auto loads = static_wheel_loads(cp);
  ChassisInputs in;
  in.steer = ackermann(0.15, cp);
  in.drive_torque = {0.4, 0.4, 0.4, 0.4};
  PlanarVelocity v{0.5, 0.0, 0.0};
  const double dt = 1e-3;
  auto f = [&](const Eigen::Vector3d& x) {
    const PlanarVelocity pv{x[0], x[1], x[2]};
    const auto a = chassis_planar_derivs(pv, in, loads, cp, tp);
    return Eigen::Vector3d{a.a_x + pv.r * pv.v_y, a.a_y - pv.r * pv.v_x, a.psi_dd};
  };
  Eigen::Vector3d x{v.v_x, v.v_y, v.r};
  double r_prev = 0.0;
  for (int k = 0; k < 30000; ++k) {
    const Eigen::Vector3d k1 = f(x), k2 = f(x + 0.5 * dt * k1), k3 = f(x + 0.5 * dt * k2), k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (k == 28999) r_prev = x[2];
  }
  EXPECT_GT(x[2], 0.0);  // left steer turns left
  EXPECT_NEAR(x[2], r_prev, 1e-6);
  // Kinematic bicycle check: r ~ v tan(delta) / L at low lateral acceleration.
  EXPECT_NEAR(x[2], x[0] * std::tan(0.15) / cp.wheelbase(), 0.1 * x[2]);
}

TEST(Ackermann, InnerWheelSteersMore) {
  const ChassisParams cp;
  const auto d = ackermann(0.2, cp);
  EXPECT_GT(d[kFrontLeft], d[kFrontRight]);
  EXPECT_EQ(d[kRearLeft], 0.0);
  EXPECT_EQ(ackermann(0.0, cp)[kFrontLeft], 0.0);
}

// ---------------------------------------------------------------------------
// Ground effect

TEST(InducedVelocity, Examples) {
  const GroundEffectParams p;
  EXPECT_EQ(induced_velocity(0.0, p), 0.0);
  EXPECT_NEAR(induced_velocity(200.0, p), 2.0 * induced_velocity(50.0, p), 1e-12);
  const auto ref = landair::testing::load_json("derived_values.json");
  EXPECT_NEAR(induced_velocity(50.0, p), ref["induced_velocity_50N"].get<double>(), 1e-12);
  EXPECT_NEAR(induced_velocity(50.0, p), 7.72, 0.005);
}

TEST(ThrustRatio, HalfRadiusIsFourThirds) {
  const GroundEffectParams p;
  const auto r = thrust_ratio(p.R / 2.0, 0.0, 7.7, p);
  EXPECT_EQ(r.ratio, 4.0 / 3.0);
  EXPECT_FALSE(r.saturated);
}

TEST(ThrustRatio, Limits) {
  const GroundEffectParams p;
  EXPECT_EQ(thrust_ratio(10.0, 0.0, 7.7, p).ratio, 1.0);
  EXPECT_EQ(thrust_ratio(p.cutoff + 1e-9, 0.0, 7.7, p).ratio, 1.0);
  EXPECT_NEAR(thrust_ratio(0.2, 1e6, 7.7, p).ratio, 1.0, 1e-9);
  // Zero induced velocity in still air uses the V = 0 branch.
  EXPECT_EQ(thrust_ratio(p.R / 2.0, 0.0, 0.0, p).ratio, 4.0 / 3.0);
}

TEST(ThrustRatio, AtLeastOneAndMonotone) {
  const GroundEffectParams p;
  const double vi = 7.7, h = 1e-4;
  for (double z = 0.0; z <= 0.7; z += 0.005) {
    for (double V = 0.0; V <= 10.0; V += 0.25) {
      const double r = thrust_ratio(z, V, vi, p).ratio;
      EXPECT_GE(r, 1.0);
      EXPECT_TRUE(std::isfinite(r));
      EXPECT_LE(thrust_ratio(z + h, V, vi, p).ratio, r + 1e-12);
      EXPECT_LE(thrust_ratio(z, V + h, vi, p).ratio, r + 1e-12);
      EXPECT_DOUBLE_EQ(thrust_ratio(z, -V, vi, p).ratio, r);
    }
  }
}

TEST(ThrustRatio, SaturatesBelowFloor) {
  const GroundEffectParams p;
  const double at_floor = thrust_ratio(p.z_floor(), 0.0, 7.7, p).ratio;
  for (double z : {0.0, 0.01, p.R / 4.0, p.z_floor() - 1e-9, -0.5}) {
    const auto r = thrust_ratio(z, 0.0, 7.7, p);
    EXPECT_EQ(r.ratio, at_floor);
    EXPECT_TRUE(r.saturated);
  }
}

TEST(EffectiveThrust, CutoffAndZeroCommand) {
  const GroundEffectParams p;
  EXPECT_EQ(effective_thrust(60.0, 0.51, 0.0, p), 60.0);
  EXPECT_EQ(effective_thrust(0.0, 0.2, 0.0, p), 0.0);
  EXPECT_GT(effective_thrust(60.0, 0.2, 0.0, p), 60.0);
}

TEST(ImageSourcePotential, Formula) {
  const GroundEffectParams p;
  const double z = 0.3, k = p.R / (4 * z);
  EXPECT_NEAR(image_source_potential({1, 2, 3}, {1, 2, 1}, z, p), -k * k / 2.0, 1e-15);
}

TEST(GroundEffectWrench, SlopePitchesTowardTheRamp) {
  // Level vehicle over a 30 degree upward ramp: the hubs with larger x are
  // closer to the ground, gain more thrust and pitch the nose up the slope.
  const RobotParams p;
  const double beta = deg2rad(30.0);
  const Vec3 com{0.6, 0.0, 0.6 * std::tan(beta) + 0.45};
  const auto xy = rotor_positions_xy(p.flight);
  std::array<double, 4> heights{}, cmd{};
  for (int i = 0; i < 4; ++i) {
    const Vec3 hub = com + p.rotor_hub_body(i);
    heights[i] = hub.z() - std::tan(beta) * hub.x();
    cmd[i] = p.weight() / 4.0;
  }
  EXPECT_LT(heights[2], heights[1]);  // front-left below rear-left
  const auto w = ground_effect_wrench(cmd, heights, 0.0, xy, p.ground);
  EXPECT_GT(w.thrust[2], w.thrust[1]);
  EXPECT_LT(w.pitch, 0.0);  // negative pitch torque raises the nose
  EXPECT_NEAR(w.roll, 0.0, 1e-9);
  EXPECT_GT(w.total, p.weight());
}
