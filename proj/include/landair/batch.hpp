#pragma once

// Batch configuration, parallel execution of seeded repeats, aggregation and
// the controller comparison.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "landair/metrics.hpp"

namespace landair {

inline constexpr int kBatchSchemaVersion = 1;

struct BatchConfig {
  int schema_version = kBatchSchemaVersion;
  std::string output_dir;
  int jobs = 1;
  bool write_logs = true;
  std::vector<Scenario> scenarios;
};

namespace detail {

inline Vec3 read_vec3(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path + ": expected an array of 3 numbers");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + ": expected an array of 3 numbers");
  }
}

inline Eigen::Vector2d read_vec2(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(path + ": expected an array of 2 numbers");
  try {
    return {j[0].get<double>(), j[1].get<double>()};
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + ": expected an array of 2 numbers");
  }
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      throw ConfigError(path + "." + it.key() + ": unknown field");
    }
  }
}

/// Applies the fields present in `j` on top of `sc`.
inline void read_scenario_fields(const nlohmann::json& j, Scenario& sc, const std::string& path) {
  require_object(j, path);
  check_keys(j,
             {"name", "kind", "slope_deg", "controller", "disturbance", "repeats", "seed", "target",
              "start_offset", "jitter", "duration", "dt", "command_time", "descent_speed", "settle_time",
              "run_out", "log_every", "params"},
             path);
  read_if(j, "name", sc.name, path);
  if (j.contains("kind")) {
    std::string k;
    read_if(j, "kind", k, path);
    if (k == "landing") sc.kind = ScenarioKind::Landing;
    else if (k == "idle") sc.kind = ScenarioKind::Idle;
    else if (k == "takeoff") sc.kind = ScenarioKind::Takeoff;
    else throw ConfigError(path + ".kind: expected landing, idle or takeoff");
  }
  read_if(j, "slope_deg", sc.slope_deg, path);
  read_if(j, "controller", sc.controller, path);
  if (j.contains("disturbance")) {
    const auto& d = j.at("disturbance");
    const std::string dp = path + ".disturbance";
    if (d.is_string()) {
      try {
        sc.disturbance.cls = parse_disturbance_class(d.get<std::string>());
      } catch (const Error& e) {
        throw ConfigError(dp + ": " + e.what());
      }
    } else {
      require_object(d, dp);
      check_keys(d, {"class", "hold"}, dp);
      if (d.contains("class")) {
        std::string c;
        read_if(d, "class", c, dp);
        try {
          sc.disturbance.cls = parse_disturbance_class(c);
        } catch (const Error& e) {
          throw ConfigError(dp + ".class: " + e.what());
        }
      }
      read_if(d, "hold", sc.disturbance.hold, dp);
    }
  }
  read_if(j, "repeats", sc.repeats, path);
  read_if(j, "seed", sc.seed, path);
  if (j.contains("target")) sc.target = read_vec2(j.at("target"), path + ".target");
  if (j.contains("start_offset")) sc.start_offset = read_vec3(j.at("start_offset"), path + ".start_offset");
  read_if(j, "jitter", sc.jitter, path);
  read_if(j, "duration", sc.duration, path);
  read_if(j, "dt", sc.dt, path);
  read_if(j, "command_time", sc.command_time, path);
  read_if(j, "descent_speed", sc.descent_speed, path);
  read_if(j, "settle_time", sc.settle_time, path);
  read_if(j, "run_out", sc.run_out, path);
  read_if(j, "log_every", sc.log_every, path);
  if (j.contains("params")) {
    sc.params = j.at("params");
    RobotParams probe;
    apply_overrides(probe, sc.params);
  }
}

inline std::string slope_label(double deg) {
  std::ostringstream os;
  os << deg;
  return os.str();
}

}  // namespace detail

/// Parses a batch configuration. Errors carry the line (syntax) or the field
/// path (content).
inline BatchConfig parse_batch_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError("config line " + std::to_string(line) + ": " + e.what());
  }
  detail::require_object(j, "config");
  detail::check_keys(j, {"schema_version", "output_dir", "jobs", "write_logs", "defaults", "scenarios", "matrix"},
                     "config");
  BatchConfig cfg;
  if (!j.contains("schema_version")) throw ConfigError("config.schema_version: missing");
  detail::read_if(j, "schema_version", cfg.schema_version, "config");
  if (cfg.schema_version != kBatchSchemaVersion) {
    throw ConfigError("config.schema_version: unsupported version " + std::to_string(cfg.schema_version));
  }
  detail::read_if(j, "output_dir", cfg.output_dir, "config");
  detail::read_if(j, "jobs", cfg.jobs, "config");
  detail::read_if(j, "write_logs", cfg.write_logs, "config");
  if (cfg.jobs < 1) throw ConfigError("config.jobs: must be >= 1");

  Scenario base;
  if (j.contains("defaults")) detail::read_scenario_fields(j.at("defaults"), base, "config.defaults");

  if (j.contains("scenarios")) {
    const auto& arr = j.at("scenarios");
    if (!arr.is_array()) throw ConfigError("config.scenarios: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Scenario sc = base;
      const std::string path = "config.scenarios[" + std::to_string(i) + "]";
      detail::read_scenario_fields(arr[i], sc, path);
      try {
        sc.validate();
      } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
      }
      cfg.scenarios.push_back(sc);
    }
  }
  if (j.contains("matrix")) {
    const auto& m = j.at("matrix");
    const std::string path = "config.matrix";
    detail::require_object(m, path);
    detail::check_keys(m, {"slopes", "controllers", "disturbances"}, path);
    std::vector<double> slopes{base.slope_deg};
    std::vector<std::string> controllers{base.controller};
    std::vector<std::string> disturbances{to_string(base.disturbance.cls)};
    detail::read_if(m, "slopes", slopes, path);
    detail::read_if(m, "controllers", controllers, path);
    detail::read_if(m, "disturbances", disturbances, path);
    for (double slope : slopes) {
      for (const auto& c : controllers) {
        for (const auto& d : disturbances) {
          Scenario sc = base;
          sc.slope_deg = slope;
          sc.controller = c;
          try {
            sc.disturbance.cls = parse_disturbance_class(d);
          } catch (const Error& e) {
            throw ConfigError(path + ".disturbances: " + e.what());
          }
          sc.name = "slope" + detail::slope_label(slope) + "_" + c + "_" + d;
          try {
            sc.validate();
          } catch (const ConfigError& e) {
            throw ConfigError(path + ": " + e.what());
          }
          cfg.scenarios.push_back(sc);
        }
      }
    }
  }
  return cfg;
}

inline BatchConfig load_batch_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_batch_config(ss.str());
}

// ---------------------------------------------------------------------------
// Execution

enum class RunStatus { Ok, Incomplete, Diverged };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Incomplete: return "incomplete";
    case RunStatus::Diverged: return "diverged";
  }
  return "ok";
}

struct RunResult {
  int repeat = 0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::Ok;
  std::string error;
  ScenarioMetrics metrics;
  std::string log_path;
};

struct Aggregate {
  int n = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double variance = std::numeric_limits<double>::quiet_NaN();  // sample variance
};

struct ScenarioResult {
  Scenario scenario;
  std::vector<RunResult> runs;
  std::map<std::string, Aggregate> aggregates;
};

struct BatchResult {
  std::vector<ScenarioResult> scenarios;
  int diverged = 0;
  int incomplete = 0;
};

inline Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  a.n = static_cast<int>(v.size());
  if (v.empty()) return a;
  double s = 0.0;
  for (double x : v) s += x;
  a.mean = s / a.n;
  double ss = 0.0;
  for (double x : v) ss += (x - a.mean) * (x - a.mean);
  a.variance = a.n > 1 ? ss / (a.n - 1) : 0.0;
  return a;
}

inline void aggregate_scenario(ScenarioResult& r) {
  r.aggregates.clear();
  for (const auto& [name, field] : metric_fields()) {
    std::vector<double> v;
    for (const auto& run : r.runs) {
      if (run.status == RunStatus::Ok && (run.metrics.*field)) v.push_back(*(run.metrics.*field));
    }
    r.aggregates[name] = aggregate(v);
  }
}

struct BatchOptions {
  int jobs = 1;
  std::string output_dir;               // empty: no files
  bool write_logs = true;
  std::optional<std::uint64_t> seed;    // overrides every scenario's base seed
};

/// Runs one repeat and writes its log and metrics sidecar when requested.
inline RunResult run_repeat(const Scenario& sc, int repeat, std::uint64_t seed, const BatchOptions& opt) {
  RunResult rr;
  rr.repeat = repeat;
  rr.seed = seed;
  SimLog log;
  try {
    log = run_scenario(sc, seed);
  } catch (const Error& e) {
    rr.status = RunStatus::Diverged;
    rr.error = e.what();
    return rr;
  }
  rr.metrics = extract_metrics(log);
  if (log.diverged) {
    rr.status = RunStatus::Diverged;
    rr.error = log.error;
  } else if (!rr.metrics.complete && sc.kind == ScenarioKind::Landing) {
    rr.status = RunStatus::Incomplete;
    rr.error = "no touchdown within the simulated duration";
  }
  if (!opt.output_dir.empty() && opt.write_logs) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(opt.output_dir) / "logs";
    fs::create_directories(dir);
    const fs::path csv = dir / (sc.name + "_r" + std::to_string(repeat) + ".csv");
    std::ofstream out(csv);
    if (!out) throw ConfigError("cannot write '" + csv.string() + "'");
    write_log_csv(out, log);
    std::ofstream side(fs::path(csv).replace_extension(".metrics.json"));
    auto j = to_json(rr.metrics);
    j["status"] = to_string(rr.status);
    j["seed"] = seed;
    side << j.dump(2) << '\n';
    rr.log_path = csv.string();
  }
  return rr;
}

/// Runs every repeat of every scenario on a pool of worker threads. Results
/// are independent of the worker count.
inline BatchResult run_batch(const std::vector<Scenario>& scenarios, const BatchOptions& opt) {
  struct Job {
    std::size_t scenario;
    int repeat;
  };
  std::vector<Job> jobs;
  BatchResult result;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    scenarios[i].validate();
    ScenarioResult sr;
    sr.scenario = scenarios[i];
    sr.runs.resize(static_cast<std::size_t>(scenarios[i].repeats));
    result.scenarios.push_back(std::move(sr));
    for (int k = 0; k < scenarios[i].repeats; ++k) jobs.push_back({i, k});
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) return;
      const Job& job = jobs[idx];
      const Scenario& sc = scenarios[job.scenario];
      const std::uint64_t seed = opt.seed.value_or(sc.seed) + static_cast<std::uint64_t>(job.repeat);
      try {
        result.scenarios[job.scenario].runs[static_cast<std::size_t>(job.repeat)] =
            run_repeat(sc, job.repeat, seed, opt);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(opt.jobs, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  for (auto& sr : result.scenarios) {
    aggregate_scenario(sr);
    for (const auto& r : sr.runs) {
      if (r.status == RunStatus::Diverged) ++result.diverged;
      if (r.status == RunStatus::Incomplete) ++result.incomplete;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reporting

inline nlohmann::json to_json(const BatchResult& b) {
  nlohmann::json out;
  out["schema_version"] = kBatchSchemaVersion;
  out["diverged"] = b.diverged;
  out["incomplete"] = b.incomplete;
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& sr : b.scenarios) {
    nlohmann::json s;
    s["name"] = sr.scenario.name;
    s["kind"] = to_string(sr.scenario.kind);
    s["slope_deg"] = sr.scenario.slope_deg;
    s["controller"] = sr.scenario.controller;
    s["disturbance"] = to_string(sr.scenario.disturbance.cls);
    for (const auto& r : sr.runs) {
      nlohmann::json rj = to_json(r.metrics);
      rj["repeat"] = r.repeat;
      rj["seed"] = r.seed;
      rj["status"] = to_string(r.status);
      if (!r.error.empty()) rj["error"] = r.error;
      if (!r.log_path.empty()) rj["log"] = r.log_path;
      s["runs"].push_back(rj);
    }
    for (const auto& [name, a] : sr.aggregates) {
      s["aggregate"][name] = {{"n", a.n}, {"mean", num(a.mean)}, {"variance", num(a.variance)}};
    }
    out["scenarios"].push_back(s);
  }
  return out;
}

/// Proposed-versus-baseline comparison per slope.
struct SlopeComparison {
  double slope_deg = 0.0;
  Aggregate time_proposed, time_baseline;          // undisturbed landing time
  Aggregate offset_proposed, offset_baseline;      // pooled over the disturbed classes
  Aggregate stroke_proposed, stroke_baseline;      // undisturbed peak stroke
  int overshoot_wins = 0, overshoot_pairs = 0;     // undisturbed, paired by repeat
  int proposed_failures = 0;                       // proposed runs without touchdown
  int baseline_failures = 0;
  std::map<std::string, std::pair<Aggregate, Aggregate>> offset_by_class;

  double time_reduction() const { return 1.0 - time_proposed.mean / time_baseline.mean; }
  double offset_reduction() const { return 1.0 - offset_proposed.mean / offset_baseline.mean; }
  double stroke_reduction() const { return 1.0 - stroke_proposed.mean / stroke_baseline.mean; }
};

inline std::vector<SlopeComparison> compare_controllers(const BatchResult& b,
                                                        const std::string& proposed = "proposed",
                                                        const std::string& baseline = "pid-baseline") {
  std::map<double, SlopeComparison> by_slope;
  std::map<double, std::map<std::string, std::array<std::vector<double>, 2>>> offsets_by_class;
  std::map<double, std::array<std::vector<double>, 2>> offsets, times, strokes;
  std::map<double, std::array<const ScenarioResult*, 2>> undisturbed;
  for (const auto& sr : b.scenarios) {
    if (sr.scenario.kind != ScenarioKind::Landing) continue;
    const int side = sr.scenario.controller == proposed ? 0 : sr.scenario.controller == baseline ? 1 : -1;
    if (side < 0) continue;
    const double slope = sr.scenario.slope_deg;
    by_slope[slope].slope_deg = slope;
    const bool disturbed = sr.scenario.disturbance.cls != DisturbanceClass::None;
    for (const auto& r : sr.runs) {
      if (r.status != RunStatus::Ok) {
        ++(side == 0 ? by_slope[slope].proposed_failures : by_slope[slope].baseline_failures);
        continue;
      }
      const auto& m = r.metrics;
      if (disturbed) {
        if (m.landing_offset_mm) {
          offsets[slope][side].push_back(*m.landing_offset_mm);
          offsets_by_class[slope][to_string(sr.scenario.disturbance.cls)][side].push_back(*m.landing_offset_mm);
        }
      } else {
        if (m.landing_time) times[slope][side].push_back(*m.landing_time);
        if (m.peak_stroke_mm) strokes[slope][side].push_back(*m.peak_stroke_mm);
      }
    }
    if (!disturbed) undisturbed[slope][side] = &sr;
  }
  std::vector<SlopeComparison> out;
  for (auto& [slope, c] : by_slope) {
    c.time_proposed = aggregate(times[slope][0]);
    c.time_baseline = aggregate(times[slope][1]);
    c.offset_proposed = aggregate(offsets[slope][0]);
    c.offset_baseline = aggregate(offsets[slope][1]);
    c.stroke_proposed = aggregate(strokes[slope][0]);
    c.stroke_baseline = aggregate(strokes[slope][1]);
    for (auto& [cls, v] : offsets_by_class[slope]) c.offset_by_class[cls] = {aggregate(v[0]), aggregate(v[1])};
    const auto pair = undisturbed[slope];
    if (pair[0] && pair[1]) {
      const std::size_t n = std::min(pair[0]->runs.size(), pair[1]->runs.size());
      for (std::size_t k = 0; k < n; ++k) {
        const auto& a = pair[0]->runs[k];
        const auto& z = pair[1]->runs[k];
        ++c.overshoot_pairs;
        // A pair only counts as a win when both runs produced the metric.
        if (a.status == RunStatus::Ok && z.status == RunStatus::Ok && a.metrics.pitch_overshoot_deg &&
            z.metrics.pitch_overshoot_deg && *a.metrics.pitch_overshoot_deg < *z.metrics.pitch_overshoot_deg) {
          ++c.overshoot_wins;
        }
      }
    }
    out.push_back(c);
  }
  return out;
}

/// Markdown comparison table: landing time and offsets per disturbance class.
inline std::string comparison_table(const BatchResult& b) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "| slope | controller | landing time (s) | offset 0-40 N (mm) | offset 60 N (mm) | offset 80 N (mm) "
        "| mean offset (mm) | peak stroke (mm) |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  auto mean = [&](const Aggregate& a) {
    if (a.n == 0) os << "-";
    else os << a.mean;
  };
  for (const auto& c : compare_controllers(b)) {
    for (int side = 0; side < 2; ++side) {
      os << "| " << c.slope_deg << " | " << (side == 0 ? "proposed" : "pid-baseline") << " | ";
      mean(side == 0 ? c.time_proposed : c.time_baseline);
      for (const char* cls : {"0-40", "60", "80"}) {
        const auto it = c.offset_by_class.find(cls);
        os << " | ";
        const Aggregate* a = nullptr;
        if (it != c.offset_by_class.end()) a = side == 0 ? &it->second.first : &it->second.second;
        if (!a || a->n == 0) os << "-";
        else os << a->mean << " ± " << std::sqrt(std::max(0.0, a->variance));
      }
      os << " | ";
      mean(side == 0 ? c.offset_proposed : c.offset_baseline);
      os << " | ";
      mean(side == 0 ? c.stroke_proposed : c.stroke_baseline);
      os << " |\n";
    }
  }
  return os.str();
}

/// Writes metrics.json and report.md into the output directory.
inline void write_batch_outputs(const BatchResult& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / "metrics.json") << to_json(b).dump(2) << '\n';
  std::ofstream(fs::path(dir) / "report.md") << comparison_table(b);
}

}  // namespace landair
