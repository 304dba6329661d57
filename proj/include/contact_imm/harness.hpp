#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "contact_imm/config.hpp"
#include "contact_imm/csv.hpp"
#include "contact_imm/estimator.hpp"
#include "contact_imm/metrics.hpp"
#include "contact_imm/sim.hpp"

namespace contact_imm {

inline constexpr const char* kSensorsFile = "sensors.csv";
inline constexpr const char* kTruthFile = "truth.csv";
inline constexpr const char* kImmFile = "estimate_imm.csv";
inline constexpr const char* kBaselineFile = "estimate_baseline.csv";
inline constexpr const char* kMetricsFile = "metrics.txt";
inline constexpr const char* kTimingFile = "timing.txt";
inline constexpr const char* kImmLatencyFile = "latency_imm.csv";
inline constexpr const char* kBaselineLatencyFile = "latency_baseline.csv";

/// Ticks allowed between a true touchdown and its detection.
inline constexpr std::size_t kLatencyBudgetTicks = 4;

struct EstimatorRun {
  std::vector<EstimateSample> samples;
  std::vector<double> step_ms;  // wall-clock time of each recursion
};

using ImmObserver = std::function<void(std::size_t tick, const ContactImm& filter)>;

inline EstimatorRun run_imm(const std::vector<SensorSample>& sensors, const RunConfig& cfg,
                            const ImmObserver& observer = {}) {
  ContactImm imm(cfg.robot, cfg.modes(), cfg.transition(), cfg.noise, cfg.bias, cfg.sim.ts(), cfg.filter);
  EstimatorRun out;
  out.samples.reserve(sensors.size());
  out.step_ms.reserve(sensors.size());
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    out.samples.push_back(imm.step(sensors[k]));
    const auto t1 = std::chrono::steady_clock::now();
    out.step_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    if (observer) observer(k, imm);
  }
  return out;
}

/// The scheduled-mode filter driven by the commanded (lagged) gait.
inline EstimatorRun run_baseline(const std::vector<SensorSample>& sensors, const RunConfig& cfg) {
  ScheduledModeKf kf(cfg.robot, cfg.modes(), cfg.noise, cfg.sim.ts(), cfg.filter);
  EstimatorRun out;
  out.samples.reserve(sensors.size());
  out.step_ms.reserve(sensors.size());
  for (const auto& s : sensors) {
    const auto t0 = std::chrono::steady_clock::now();
    out.samples.push_back(kf.step(s, cfg.gait.commanded(s.t)));
    const auto t1 = std::chrono::steady_clock::now();
    out.step_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return out;
}

/// Tick at which each injected early touchdown becomes true.
inline std::vector<std::pair<Leg, std::size_t>> early_contact_ticks(const GaitSchedule& gait, double ts) {
  std::vector<std::pair<Leg, std::size_t>> out;
  for (const auto& e : gait.early_contacts) {
    const double td = gait.first_touchdown_at_or_after(e.leg, e.time) - e.advance;
    out.emplace_back(e.leg, static_cast<std::size_t>(std::ceil((td - GaitSchedule::kEps) / ts)));
  }
  return out;
}

using KeyValues = std::vector<std::pair<std::string, double>>;

inline void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv) out << k << " = " << format_number(v) << '\n';
}

inline std::map<std::string, double> read_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, double> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(source + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      out[detail::trim(line.substr(0, eq))] = detail::to_double(detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw IoError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::map<std::string, double> read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_key_values(in, path);
}

struct LatencySummary {
  std::size_t events = 0;
  std::size_t within_budget = 0;
  std::size_t missed = 0;
  double mean_ms = 0.0;
  double max_ms = 0.0;
};

inline LatencySummary summarize_latency(const std::vector<LatencyEvent>& events, double ts) {
  LatencySummary s;
  double sum = 0.0;
  std::size_t detected = 0;
  for (const auto& e : events) {
    ++s.events;
    if (!e.latency_ticks) {
      ++s.missed;
      continue;
    }
    const double ms = static_cast<double>(*e.latency_ticks) * ts * 1000.0;
    sum += ms;
    ++detected;
    s.max_ms = std::max(s.max_ms, ms);
    if (*e.latency_ticks <= kLatencyBudgetTicks) ++s.within_budget;
  }
  if (detected > 0) s.mean_ms = sum / static_cast<double>(detected);
  return s;
}

/// Error statistics of one estimator on one trace.
struct Evaluation {
  Metrics metrics;
  std::vector<LatencyEvent> touchdowns;
  std::vector<LatencyEvent> liftoffs;
  std::vector<LatencyEvent> early;
};

inline Evaluation evaluate(const SimTrace& truth, const std::vector<EstimateSample>& est, const RunConfig& cfg) {
  if (truth.size() != est.size()) throw LengthMismatch("truth and estimates differ in length");
  std::vector<StateVec> x;
  std::vector<Vec4> p;
  x.reserve(est.size());
  p.reserve(est.size());
  for (const auto& e : est) {
    x.push_back(e.state);
    p.push_back(e.contact_prob);
  }
  Evaluation ev;
  const std::size_t warmup = cfg.warmup_ticks();
  ev.metrics = compute_metrics(estimator_frame_truth(truth), x, truth.contacts, p, warmup);
  const auto early = early_contact_ticks(cfg.gait, cfg.sim.ts());
  for (const auto& e : ev.metrics.events) {
    if (e.tick < warmup) continue;
    (e.touchdown ? ev.touchdowns : ev.liftoffs).push_back(e);
    for (const auto& [leg, tick] : early) {
      if (e.touchdown && e.leg == leg && e.tick == tick) ev.early.push_back(e);
    }
  }
  return ev;
}

inline void append_metrics(KeyValues& kv, const std::string& prefix, const Evaluation& ev, double ts) {
  const auto& m = ev.metrics;
  kv.emplace_back(prefix + ".full_rmse", m.full_rmse);
  kv.emplace_back(prefix + ".theta_rmse", m.theta_rmse);
  kv.emplace_back(prefix + ".position_rmse", m.position_rmse);
  kv.emplace_back(prefix + ".omega_rmse", m.omega_rmse);
  kv.emplace_back(prefix + ".velocity_rmse", m.velocity_rmse);
  kv.emplace_back(prefix + ".z_rmse_cm", m.z_rmse_cm);
  kv.emplace_back(prefix + ".z_max_cm", m.z_max_cm);
  auto latency = [&](const std::string& name, const std::vector<LatencyEvent>& events) {
    const auto s = summarize_latency(events, ts);
    kv.emplace_back(prefix + "." + name + "_events", static_cast<double>(s.events));
    kv.emplace_back(prefix + "." + name + "_within_4_ticks", static_cast<double>(s.within_budget));
    kv.emplace_back(prefix + "." + name + "_missed", static_cast<double>(s.missed));
    kv.emplace_back(prefix + "." + name + "_latency_mean_ms", s.mean_ms);
    kv.emplace_back(prefix + "." + name + "_latency_max_ms", s.max_ms);
  };
  latency("touchdown", ev.touchdowns);
  latency("liftoff", ev.liftoffs);
  latency("early_contact", ev.early);
}

inline void write_latency_csv(const std::string& path, const Evaluation& ev, double ts) {
  auto out = open_output(path);
  out << "t,leg,touchdown,early,latency_ticks,latency_ms\n";
  std::vector<LatencyEvent> all = ev.touchdowns;
  all.insert(all.end(), ev.liftoffs.begin(), ev.liftoffs.end());
  std::sort(all.begin(), all.end(), [](const LatencyEvent& a, const LatencyEvent& b) {
    return a.tick != b.tick ? a.tick < b.tick : index_of(a.leg) < index_of(b.leg);
  });
  for (const auto& e : all) {
    const bool early = std::any_of(ev.early.begin(), ev.early.end(),
                                   [&](const LatencyEvent& x) { return x.tick == e.tick && x.leg == e.leg; });
    const double lat = e.latency_ticks ? static_cast<double>(*e.latency_ticks) : -1.0;
    detail::write_row(out, {static_cast<double>(e.tick) * ts, static_cast<double>(index_of(e.leg)),
                            e.touchdown ? 1.0 : 0.0, early ? 1.0 : 0.0, lat, lat < 0 ? -1.0 : lat * ts * 1000.0});
  }
}

struct Paths {
  std::filesystem::path dir;
  [[nodiscard]] std::string operator()(const char* name) const { return (dir / name).string(); }
};

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

/// Simulates the scenario and writes sensors.csv and truth.csv.
inline SimTrace simulate_to(const RunConfig& cfg, const std::filesystem::path& out) {
  ensure_dir(out);
  const SimTrace trace = run_scenario(cfg.sim, cfg.gait, cfg.robot);
  const Paths p{out};
  write_sensors_file(p(kSensorsFile), trace.sensors);
  write_truth_file(p(kTruthFile), trace);
  return trace;
}

struct EstimateOutputs {
  std::optional<EstimatorRun> imm;
  std::optional<EstimatorRun> baseline;
};

/// Runs the selected estimators on a sensor file; writes estimate CSVs and timing.txt.
inline EstimateOutputs estimate_to(const RunConfig& cfg, const std::string& sensors_path,
                                   const std::filesystem::path& out, const ImmObserver& observer = {}) {
  ensure_dir(out);
  const auto sensors = read_sensors_file(sensors_path);
  const Paths p{out};
  EstimateOutputs res;
  const int num_modes = cfg.modes().size();
  KeyValues timing;
  if (cfg.estimators != EstimatorChoice::Baseline) {
    res.imm = run_imm(sensors, cfg, observer);
    write_estimates_file(p(kImmFile), res.imm->samples, num_modes);
    const auto t = timing_stats(res.imm->step_ms);
    timing.insert(timing.end(), {{"imm.step_mean_ms", t.mean_ms}, {"imm.step_median_ms", t.median_ms},
                                 {"imm.step_max_ms", t.max_ms}});
  }
  if (cfg.estimators != EstimatorChoice::Imm) {
    res.baseline = run_baseline(sensors, cfg);
    write_estimates_file(p(kBaselineFile), res.baseline->samples, num_modes);
    const auto t = timing_stats(res.baseline->step_ms);
    timing.insert(timing.end(), {{"baseline.step_mean_ms", t.mean_ms}, {"baseline.step_median_ms", t.median_ms},
                                 {"baseline.step_max_ms", t.max_ms}});
  }
  auto tf = open_output(p(kTimingFile));
  write_key_values(tf, timing);
  return res;
}

/// Recomputes the metrics from the CSV files in `dir` and writes metrics.txt.
inline KeyValues evaluate_dir(const RunConfig& cfg, const std::filesystem::path& dir) {
  const Paths p{dir};
  const double ts = cfg.sim.ts();
  const SimTrace truth = read_truth_file(p(kTruthFile), ts);
  KeyValues kv;
  kv.emplace_back("ticks", static_cast<double>(truth.size()));
  kv.emplace_back("warmup_ticks", static_cast<double>(std::min(cfg.warmup_ticks(), truth.size())));
  kv.emplace_back("seed", static_cast<double>(cfg.sim.seed));
  std::optional<Evaluation> imm, base;
  if (std::filesystem::exists(p(kImmFile))) {
    imm = evaluate(truth, read_estimates_file(p(kImmFile)), cfg);
    append_metrics(kv, "imm", *imm, ts);
    write_latency_csv(p(kImmLatencyFile), *imm, ts);
  }
  if (std::filesystem::exists(p(kBaselineFile))) {
    base = evaluate(truth, read_estimates_file(p(kBaselineFile)), cfg);
    append_metrics(kv, "baseline", *base, ts);
    write_latency_csv(p(kBaselineLatencyFile), *base, ts);
  }
  if (imm && base) {
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
    kv.emplace_back("ratio.full_rmse", ratio(imm->metrics.full_rmse, base->metrics.full_rmse));
    kv.emplace_back("ratio.z_rmse", ratio(imm->metrics.z_rmse_cm, base->metrics.z_rmse_cm));
    kv.emplace_back("ratio.velocity_rmse", ratio(imm->metrics.velocity_rmse, base->metrics.velocity_rmse));
  }
  auto out = open_output(p(kMetricsFile));
  write_key_values(out, kv);
  return kv;
}

/// simulate, then estimate from the written sensor file, then evaluate from
/// the written files, so every number in metrics.txt is reproducible from the CSVs.
inline KeyValues run_pipeline(const RunConfig& cfg, const std::filesystem::path& out,
                              const ImmObserver& observer = {}) {
  simulate_to(cfg, out);
  estimate_to(cfg, Paths{out}(kSensorsFile), out, observer);
  return evaluate_dir(cfg, out);
}

/// Aggregates metrics files: one line per key with mean, min and max over runs.
inline std::string report(const std::vector<std::string>& metric_files) {
  if (metric_files.empty()) throw ConfigError("no metrics files given");
  std::map<std::string, std::vector<double>> values;
  for (const auto& f : metric_files) {
    for (const auto& [k, v] : read_key_values_file(f)) values[k].push_back(v);
  }
  std::ostringstream out;
  out << "runs = " << metric_files.size() << '\n';
  out << "# key: mean min max (count)\n";
  for (const auto& [k, vs] : values) {
    double sum = 0.0, lo = vs.front(), hi = vs.front();
    for (double v : vs) {
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out << k << ": " << format_number(sum / static_cast<double>(vs.size())) << ' ' << format_number(lo) << ' '
        << format_number(hi) << " (" << vs.size() << ")\n";
  }
  return out.str();
}

}  // namespace contact_imm
