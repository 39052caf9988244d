// Plans a minimum-jerk landing approach with and without motion limits and
// reports duration, cost and the peak velocity, jerk, thrust and body rate.
//
//   demo_plan_trajectory [v_max] [j_max]   (defaults 1.2 m/s, 15 m/s^3)

#include <iomanip>
#include <iostream>

#include "landair/jlt_planner.hpp"
#include "landair/params.hpp"

using namespace landair;

namespace {

void summarize(const char* label, const Plan3D& plan, const MotionLimits& lim, double mass) {
  double v = 0.0, j = 0.0;
  for (const auto& ax : plan.axes) {
    v = std::max(v, ax.max_abs_velocity());
    j = std::max(j, ax.max_abs_jerk());
  }
  const auto rep = check_input_feasibility(plan, lim, mass);
  std::cout << std::fixed << std::setprecision(3) << label << ": T=" << plan.T << " s, cost=" << plan.total_cost
            << ", |v|max=" << v << " m/s, |j|max=" << j << " m/s^3, thrust " << rep.min_thrust << ".."
            << rep.max_thrust << " N, body rate " << rep.max_rate << " rad/s\n";
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const RobotParams p;
    MotionLimits lim;
    lim.v_max = 1.2;
    lim.j_max = 15.0;
    if (argc > 1) lim.v_max = std::stod(argv[1]);
    if (argc > 2) lim.j_max = std::stod(argv[2]);

    // From a hover 2 m up and 1 m back to a 30 degree ramp, arriving with a
    // 0.3 m/s descent and an acceleration that tilts the body onto the slope.
    const double beta = deg2rad(30.0);
    const double aT = kGravity * std::tan(beta);
    const std::array<AxisBoundary, 3> bs{AxisBoundary{-1.0, 0, 0, 0.0, 0, -aT, {}},
                                         AxisBoundary{0.0, 0, 0, 0.0, 0, 0, {}},
                                         AxisBoundary{2.0, 0, 0, 0.25, -0.3, 0, {}}};

    MotionLimits open = lim;
    open.v_max = open.j_max = std::numeric_limits<double>::infinity();
    const Plan3D limited = plan_3d_feasible(bs, lim, p.flight.m);
    std::array<AxisBoundary, 3> same_T = bs;
    for (auto& b : same_T) b.T = limited.T;

    summarize("free duration, no limits", plan_3d(bs, open), lim, p.flight.m);
    summarize("same duration, no limits", plan_3d(same_T, open), lim, p.flight.m);
    summarize("limited                 ", limited, lim, p.flight.m);
    std::cout << "limits: v_max=" << lim.v_max << " m/s, j_max=" << lim.j_max << " m/s^3, thrust " << lim.f_min
              << ".." << lim.f_max << " N, body rate " << lim.omega_max << " rad/s\n\n";
    write_plan_csv(std::cout, limited, 20.0);
  } catch (const InfeasiblePlan& e) {
    std::cerr << "demo_plan_trajectory: infeasible (" << e.binding() << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "demo_plan_trajectory: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
