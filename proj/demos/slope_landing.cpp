// Lands on a slope with both controllers and prints the mode timeline and
// landing metrics side by side.
//
//   demo_slope_landing [slope_deg] [disturbance: none|0-40|60|80] [seed]

#include <iomanip>
#include <iostream>
#include <string>

#include "landair/metrics.hpp"

using namespace landair;

namespace {

void print_timeline(const SimLog& log) {
  std::optional<Mode> last;
  for (const auto& r : log.rows) {
    if (last && *last == r.mode) continue;
    std::cout << "  " << std::setw(7) << std::fixed << std::setprecision(3) << r.t << " s  " << to_string(r.mode)
              << "  z=" << std::setprecision(3) << r.P.z() << " m\n";
    last = r.mode;
  }
}

std::string opt(const std::optional<double>& v, int digits) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << *v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  try {
    Scenario sc;
    sc.slope_deg = argc > 1 ? std::stod(argv[1]) : 30.0;
    sc.disturbance.cls = parse_disturbance_class(argc > 2 ? argv[2] : "none");
    const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 1;
    sc.validate();

    for (const char* controller : {"proposed", "pid-baseline"}) {
      sc.controller = controller;
      sc.name = std::string("demo-") + controller;
      const SimLog log = run_scenario(sc, seed);
      const auto m = extract_metrics(log);
      std::cout << controller << " on " << sc.slope_deg << " deg, disturbance " << to_string(sc.disturbance.cls)
                << ", seed " << seed << '\n';
      print_timeline(log);
      std::cout << "  landing time " << opt(m.landing_time, 3) << " s, offset " << opt(m.landing_offset_mm, 1)
                << " mm, peak stroke " << opt(m.peak_stroke_mm, 2) << " mm, pitch overshoot "
                << opt(m.pitch_overshoot_deg, 2) << " deg, stroke settles in " << opt(m.stroke_convergence_time, 3)
                << " s\n";
      std::cout << std::defaultfloat;
      if (!m.complete) std::cout << "  no touchdown confirmed" << (log.diverged ? " (diverged)" : "") << '\n';
      std::cout << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "demo_slope_landing: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
