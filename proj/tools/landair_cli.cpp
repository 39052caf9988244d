// landair: batch runner, log metrics and planner inspection.
//
//   landair run --config <file> [--out <dir>] [--jobs <n>] [--seed <u64>]
//   landair metrics --log <csv>
//   landair plan --axis p0,v0,a0,pT,vT,aT[,T] [--v-max v] [--j-max j] [--rate hz]
//
// The output directory defaults to $LANDAIR_OUT_DIR, then to the config's
// output_dir, then to ./landair_out.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "landair/batch.hpp"

namespace {

constexpr int kExitRunsFailed = 1;
constexpr int kExitUsage = 2;

std::vector<double> parse_csv_numbers(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw landair::ConfigError("not a number: '" + item + "'");
    }
    if (used != item.size()) throw landair::ConfigError("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

int cmd_run(const std::string& config, std::string out, int jobs, std::optional<std::uint64_t> seed) {
  const auto cfg = landair::load_batch_config(config);
  if (out.empty()) {
    if (const char* env = std::getenv("LANDAIR_OUT_DIR"); env && *env) out = env;
    else if (!cfg.output_dir.empty()) out = cfg.output_dir;
    else out = "landair_out";
  }
  landair::BatchOptions opt;
  opt.jobs = jobs > 0 ? jobs : cfg.jobs;
  opt.output_dir = out;
  opt.write_logs = cfg.write_logs;
  opt.seed = seed;
  const auto result = landair::run_batch(cfg.scenarios, opt);
  landair::write_batch_outputs(result, out);

  std::size_t runs = 0;
  for (const auto& sr : result.scenarios) runs += sr.runs.size();
  std::cout << landair::comparison_table(result);
  std::cout << runs << " runs, " << result.diverged << " diverged, " << result.incomplete
            << " incomplete; results in " << out << "\n";
  for (const auto& sr : result.scenarios) {
    for (const auto& r : sr.runs) {
      if (r.status != landair::RunStatus::Ok) {
        std::cout << "  " << sr.scenario.name << " repeat " << r.repeat << " (seed " << r.seed
                  << "): " << landair::to_string(r.status) << ": " << r.error << "\n";
      }
    }
  }
  return result.diverged + result.incomplete == 0 ? 0 : kExitRunsFailed;
}

int cmd_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw landair::ConfigError("cannot open log '" + path + "'");
  const auto log = landair::read_log_csv(in);
  auto j = landair::to_json(landair::extract_metrics(log));
  j["scenario"] = log.scenario;
  j["controller"] = log.controller;
  j["seed"] = log.seed;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_plan(const std::string& axis, double v_max, double j_max, double rate) {
  const auto v = parse_csv_numbers(axis);
  if (v.size() != 6 && v.size() != 7) {
    throw landair::ConfigError("--axis expects p0,v0,a0,pT,vT,aT[,T]");
  }
  landair::AxisBoundary b{v[0], v[1], v[2], v[3], v[4], v[5], std::nullopt};
  if (v.size() == 7) b.T = v[6];
  landair::MotionLimits lim;
  lim.v_max = v_max;
  lim.j_max = j_max;
  const auto tr = landair::plan_axis(b, lim);
  std::cout << "# T=" << tr.duration() << " cost=" << tr.cost()
            << " constrained=" << (tr.constrained() ? "true" : "false") << "\n";
  std::cout.precision(10);
  landair::write_axis_csv(std::cout, tr, rate);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"land-air robot simulator"};
  app.require_subcommand(1);

  std::string config, out;
  int jobs = 0;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run a batch of scenarios");
  run->add_option("--config", config, "batch configuration (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory");
  run->add_option("--jobs", jobs, "worker threads (default: config value)")->check(CLI::NonNegativeNumber);
  run->add_option("--seed", seed, "base seed overriding every scenario");

  std::string log_path;
  auto* metrics = app.add_subcommand("metrics", "landing metrics of one log as JSON");
  metrics->add_option("--log", log_path, "simulation log (CSV)")->required();

  std::string axis;
  double v_max = std::numeric_limits<double>::infinity();
  double j_max = std::numeric_limits<double>::infinity();
  double rate = 100.0;
  auto* plan = app.add_subcommand("plan", "plan one axis and print samples as CSV");
  plan->add_option("--axis", axis, "p0,v0,a0,pT,vT,aT[,T]")->required();
  plan->add_option("--v-max", v_max, "speed bound (m/s), unbounded by default")->check(CLI::PositiveNumber);
  plan->add_option("--j-max", j_max, "jerk bound (m/s^3), unbounded by default")->check(CLI::PositiveNumber);
  plan->add_option("--rate", rate, "sample rate (Hz)")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out, jobs, seed);
    if (*metrics) return cmd_metrics(log_path);
    if (*plan) return cmd_plan(axis, v_max, j_max, rate);
  } catch (const landair::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
