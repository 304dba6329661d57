#pragma once

#include <array>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "contact_imm/dynamics.hpp"
#include "contact_imm/estimator.hpp"
#include "contact_imm/imm.hpp"
#include "contact_imm/measurements.hpp"
#include "contact_imm/model.hpp"
#include "contact_imm/sim.hpp"

namespace contact_imm {

enum class EstimatorChoice { Imm, Baseline, Both };

inline EstimatorChoice parse_estimators(const std::string& s) {
  if (s == "imm") return EstimatorChoice::Imm;
  if (s == "baseline") return EstimatorChoice::Baseline;
  if (s == "both") return EstimatorChoice::Both;
  throw ConfigError("unknown estimator selection '" + s + "' (expected imm, baseline or both)");
}

/// Everything needed to simulate a scenario and run both estimators on it.
struct RunConfig {
  SimConfig sim;
  GaitSchedule gait;
  RobotParams robot;
  NoiseConfig noise = NoiseConfig::standard();
  BiasConfig bias;
  FilterOptions filter;
  std::string mode_set = "trot8";
  std::array<double, 4> pi{0.8, 0.8, 0.8, 0.8};
  EstimatorChoice estimators = EstimatorChoice::Both;
  /// Seconds at the start of a run excluded from the error statistics.
  double warmup = 1.0;

  RunConfig() { gait.schedule_offset = 0.02; }

  [[nodiscard]] ModeSet modes() const { return ModeSet::by_name(mode_set); }

  /// The trot matrix for the 8-mode set; otherwise stay with pi0 and jump uniformly.
  [[nodiscard]] TransitionMatrix transition() const {
    const ModeSet m = modes();
    if (m.size() == 8 && mode_set != "full16") return TransitionMatrix::trot(pi[0], pi[1], pi[2], pi[3]);
    return TransitionMatrix::sticky(m.size(), pi[0]);
  }

  [[nodiscard]] std::size_t warmup_ticks() const {
    return static_cast<std::size_t>(std::floor(warmup * sim.rate + 1e-9));
  }

  void validate() const {
    sim.validate();
    gait.validate();
    robot.validate();
    noise.validate();
    (void)transition();
    if (bias.c_force < 0.0) throw ConfigError("c_force must be non-negative");
    if (!(filter.initial_cov_scale > 0.0)) throw ConfigError("initial covariance scale must be positive");
    if (!(warmup >= 0.0)) throw ConfigError("warmup must be non-negative");
    if (gait.always_stance() && sim.speed != 0.0) throw ConfigError("a standing gait requires speed = 0");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

inline double to_double(const std::string& s) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) throw ConfigError("'" + s + "' is not a number");
  return v;
}

inline bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("'" + s + "' is not a boolean");
}

inline std::uint64_t to_u64(const std::string& s) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || *end != '\0' || errno == ERANGE) throw ConfigError("'" + s + "' is not a seed");
  return v;
}

inline std::vector<double> to_doubles(const std::string& s, size_t n) {
  const auto w = words(s);
  if (w.size() != n) throw ConfigError("expected " + std::to_string(n) + " numbers, got " + std::to_string(w.size()));
  std::vector<double> out;
  for (const auto& x : w) out.push_back(to_double(x));
  return out;
}

}  // namespace detail

/// Parses the scenario format:
///
///   # comment
///   [section]
///   key = value
///
/// Sections: sim, gait, robot, filter, run. Unknown sections or keys are
/// errors. `early_contact = LEG TIME ADVANCE` may repeat.
inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&)>;
  auto num = [](double& dst) -> Setter { return [&dst](const std::string& v) { dst = detail::to_double(v); }; };
  auto flag = [](bool& dst) -> Setter { return [&dst](const std::string& v) { dst = detail::to_bool(v); }; };

  auto& s = cfg.sim;
  auto& g = cfg.gait;
  auto& r = cfg.robot;
  auto& n = cfg.noise;
  const std::map<std::string, std::map<std::string, Setter>> table{
      {"sim",
       {{"duration", num(s.duration)},
        {"rate", num(s.rate)},
        {"seed", [&](const std::string& v) { s.seed = detail::to_u64(v); }},
        {"speed", num(s.speed)},
        {"height", num(s.height)},
        {"swing_height", num(s.swing_height)},
        {"swing_leg_mass", num(s.swing_leg_mass)},
        {"model_mismatch", num(s.model_mismatch)},
        {"exact_euler_rates", flag(s.exact_euler_rates)},
        {"noise_theta", num(s.noise.theta)},
        {"noise_omega", num(s.noise.omega)},
        {"noise_accel", num(s.noise.accel)},
        {"noise_q", num(s.noise.q)},
        {"noise_qdot", num(s.noise.q_dot)},
        {"noise_tau", num(s.noise.tau)},
        {"kp_height", num(s.gains.kp_lin)},
        {"kd_height", num(s.gains.kd_lin)},
        {"kd_lateral", num(s.gains.kd_lat)},
        {"kp_attitude", num(s.gains.kp_rot)},
        {"kd_attitude", num(s.gains.kd_rot)},
        {"foot_feedback", num(s.gains.foot_feedback)}}},
      {"gait",
       {{"type", [&](const std::string& v) { g.type = parse_gait(v); }},
        {"period", num(g.period)},
        {"duty", num(g.duty)},
        {"schedule_offset", num(g.schedule_offset)},
        {"early_contact",
         [&](const std::string& v) {
           const auto w = detail::words(v);
           if (w.size() != 3) throw ConfigError("early_contact expects: LEG TIME ADVANCE");
           const auto leg = parse_leg(w[0]);
           if (!leg) throw ConfigError("unknown leg '" + w[0] + "'");
           g.early_contacts.push_back({*leg, detail::to_double(w[1]), detail::to_double(w[2])});
         }}}},
      {"robot",
       {{"mass", num(r.mass)},
        {"inertia",
         [&](const std::string& v) {
           const auto d = detail::to_doubles(v, 3);
           r.inertia = Vec3(d[0], d[1], d[2]).asDiagonal();
         }},
        {"hip_offset_x", num(r.hip_offset_x)},
        {"hip_offset_y", num(r.hip_offset_y)},
        {"l_hip", num(r.l_hip)},
        {"l_thigh", num(r.l_thigh)},
        {"l_calf", num(r.l_calf)},
        {"force_transpose_convention", flag(r.force_transpose_convention)}}},
      {"filter",
       {{"modes", [&](const std::string& v) { cfg.mode_set = v; }},
        {"pi",
         [&](const std::string& v) {
           const auto d = detail::to_doubles(v, 4);
           for (size_t i = 0; i < 4; ++i) cfg.pi[i] = d[i];
         }},
        {"p_bar", num(n.p_bar)},
        {"flight_inflation", num(n.flight_inflation)},
        {"q_diag",
         [&](const std::string& v) {
           const auto d = detail::to_doubles(v, kStateDim);
           for (int i = 0; i < kStateDim; ++i) n.q_diag(i) = d[static_cast<size_t>(i)];
         }},
        {"r_base",
         [&](const std::string& v) {
           const auto d = detail::to_doubles(v, kMeasDim);
           for (int i = 0; i < kMeasDim; ++i) n.r_base(i) = d[static_cast<size_t>(i)];
         }},
        {"covariance",
         [&](const std::string& v) {
           if (v == "joseph") {
             cfg.filter.covariance_form = CovarianceForm::Joseph;
           } else if (v == "standard") {
             cfg.filter.covariance_form = CovarianceForm::Standard;
           } else {
             throw ConfigError("covariance must be joseph or standard");
           }
         }},
        {"initial_cov_scale", num(cfg.filter.initial_cov_scale)},
        {"c_force", num(cfg.bias.c_force)},
        {"friction_nu", num(cfg.bias.friction_nu)},
        {"bias", flag(cfg.bias.enabled)}}},
      {"run",
       {{"estimators", [&](const std::string& v) { cfg.estimators = parse_estimators(v); }},
        {"warmup", num(cfg.warmup)}}},
  };

  std::string section;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigError(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!table.count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of a section");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto& keys = table.at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) fail("unknown key '" + key + "' in [" + section + "]");
    try {
      it->second(value);
    } catch (const ConfigError& e) {
      fail(key + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

inline RunConfig parse_config_string(const std::string& text, const std::string& source = "<string>") {
  std::istringstream in(text);
  return parse_config(in, source);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path);
  return parse_config(in, path);
}

}  // namespace contact_imm
