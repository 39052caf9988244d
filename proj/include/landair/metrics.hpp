#pragma once

// Landing metrics derived from a simulation log.

#include <cmath>
#include <optional>
#include <string>

#include "json.hpp"
#include "landair/scenario.hpp"

namespace landair {

struct ScenarioMetrics {
  bool complete = false;  // touchdown confirmed and no divergence
  std::optional<double> landing_time;             // s, planning-mode entry to touchdown
  std::optional<double> landing_offset_mm;        // horizontal touchdown error
  std::optional<double> peak_stroke_mm;           // largest compression of any strut
  std::optional<double> stroke_convergence_time;  // s after four-wheel contact
  std::optional<double> pitch_overshoot_deg;      // after four-wheel contact
};

struct MetricsOptions {
  double convergence_band = 0.05;  // fraction of the final stroke
  double band_floor = 1e-4;        // m, smallest band half-width
};

inline ScenarioMetrics extract_metrics(const SimLog& log, const MetricsOptions& opt = {}) {
  ScenarioMetrics m;
  m.complete = log.touchdown.has_value() && !log.diverged;
  if (log.touchdown && log.plan_start) m.landing_time = log.touchdown->t - *log.plan_start;
  if (log.touchdown) m.landing_offset_mm = 1000.0 * (log.touchdown->xy - log.target).norm();

  if (!log.rows.empty()) {
    double peak = 0.0;
    for (const auto& r : log.rows) {
      for (double s : r.stroke) peak = std::max(peak, s);
    }
    m.peak_stroke_mm = 1000.0 * peak;
  }

  if (log.all_contact && !log.rows.empty()) {
    const double t0 = *log.all_contact;
    const LogRow& last = log.rows.back();
    double settled = t0;
    double overshoot = 0.0;
    for (const auto& r : log.rows) {
      if (r.t < t0) continue;
      for (int i = 0; i < 4; ++i) {
        const double band = std::max(opt.band_floor, opt.convergence_band * std::abs(last.stroke[i]));
        if (std::abs(r.stroke[i] - last.stroke[i]) > band) settled = r.t;
      }
      overshoot = std::max(overshoot, std::abs(r.eta.theta - last.eta.theta));
    }
    m.stroke_convergence_time = settled - t0;
    m.pitch_overshoot_deg = overshoot * 180.0 / kPi;
  }
  return m;
}

inline nlohmann::json to_json(const ScenarioMetrics& m) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"complete", m.complete},
          {"landing_time", opt(m.landing_time)},
          {"landing_offset_mm", opt(m.landing_offset_mm)},
          {"peak_stroke_mm", opt(m.peak_stroke_mm)},
          {"stroke_convergence_time", opt(m.stroke_convergence_time)},
          {"pitch_overshoot_deg", opt(m.pitch_overshoot_deg)}};
}

/// Metric names in report order, with accessors.
inline const std::vector<std::pair<std::string, std::optional<double> ScenarioMetrics::*>>& metric_fields() {
  static const std::vector<std::pair<std::string, std::optional<double> ScenarioMetrics::*>> f{
      {"landing_time", &ScenarioMetrics::landing_time},
      {"landing_offset_mm", &ScenarioMetrics::landing_offset_mm},
      {"peak_stroke_mm", &ScenarioMetrics::peak_stroke_mm},
      {"stroke_convergence_time", &ScenarioMetrics::stroke_convergence_time},
      {"pitch_overshoot_deg", &ScenarioMetrics::pitch_overshoot_deg}};
  return f;
}

}  // namespace landair
