// Regenerates the frozen regression traces under tests/data. Run after an
// intentional change to the dynamics or controllers:
//
//   ./build/make_goldens tests/data

#include <fstream>
#include <iostream>

#include "landair/metrics.hpp"

using namespace landair;

namespace {

nlohmann::json golden(const Scenario& sc, std::uint64_t seed) {
  const SimLog log = run_scenario(sc, seed);
  if (!log.touchdown || log.diverged) throw Error("golden run did not land: " + sc.name + " " + log.error);
  nlohmann::json j;
  j["scenario"] = sc.name;
  j["seed"] = seed;
  j["touchdown_t"] = log.touchdown->t;
  j["touchdown_x"] = log.touchdown->xy.x();
  j["touchdown_y"] = log.touchdown->xy.y();
  j["rows"] = log.rows.size();
  j["metrics"] = to_json(extract_metrics(log));
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "tests/data";
  try {
    for (double slope : {10.0, 30.0}) {
      Scenario sc;
      sc.slope_deg = slope;
      sc.controller = "proposed";
      sc.name = "golden-" + std::to_string(static_cast<int>(slope)) + "deg";
      const std::string path = dir + "/golden_landing_" + std::to_string(static_cast<int>(slope)) + "deg.json";
      std::ofstream(path) << golden(sc, 1).dump(2) << '\n';
      std::cout << "wrote " << path << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "make_goldens: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
