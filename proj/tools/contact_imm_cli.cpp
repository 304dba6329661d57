// Command-line front end: simulate, estimate, run, report.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "contact_imm/contact_imm.hpp"

namespace ci = contact_imm;
namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitConfig = 4;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ci::IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const ci::ConfigError*>(&e)) return kExitConfig;
  return kExitRuntime;
}

const char* kind(int code) {
  switch (code) {
    case kExitIo: return "io error";
    case kExitConfig: return "config error";
    default: return "error";
  }
}

// "3", "1,2,5", "1-5" or combinations such as "1-3,9".
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::string item;
  std::istringstream in(text);
  auto num = [](const std::string& s) { return ci::detail::to_u64(ci::detail::trim(s)); };
  while (std::getline(in, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(num(item));
      continue;
    }
    const auto lo = num(item.substr(0, dash));
    const auto hi = num(item.substr(dash + 1));
    if (hi < lo || hi - lo > 100000) throw ci::ConfigError("bad seed range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw ci::ConfigError("empty seed list");
  return out;
}

unsigned batch_threads(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CONTACT_IMM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, jobs));
}

ci::RunConfig load(const std::string& scenario, const std::optional<std::uint64_t>& seed) {
  ci::RunConfig cfg = ci::load_config(scenario);
  if (seed) cfg.sim.seed = *seed;
  return cfg;
}

void print_summary(const ci::KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k.rfind("ratio.", 0) == 0 || k.find("rmse") != std::string::npos || k.find("_within_") != std::string::npos ||
        k.find("_events") != std::string::npos) {
      std::cout << "  " << k << " = " << ci::format_number(v) << '\n';
    }
  }
}

int run_batch(const std::string& scenario, const std::vector<std::uint64_t>& seeds, const fs::path& out) {
  const unsigned threads = batch_threads(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  int first_error = 0;
  std::vector<std::string> metric_files(seeds.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      const fs::path dir = out / ("seed_" + std::to_string(seeds[i]));
      try {
        ci::run_pipeline(load(scenario, seeds[i]), dir);
        metric_files[i] = (dir / ci::kMetricsFile).string();
        std::lock_guard lock(mu);
        std::cout << "seed " << seeds[i] << ": done -> " << dir.string() << '\n';
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        const int code = exit_code_for(e);
        std::cerr << "seed " << seeds[i] << ": " << kind(code) << ": " << e.what() << '\n';
        if (!first_error) first_error = code;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) return first_error;

  const std::string summary = ci::report(metric_files);
  auto f = ci::open_output((out / "report.txt").string());
  f << summary;
  std::cout << summary;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contact detection and trunk-state estimation for quadrupeds with an IMM Kalman filter"};
  app.require_subcommand(1);

  std::string scenario, out_dir, sensors, seeds_text, report_out;
  std::optional<std::uint64_t> seed;
  std::string estimators;
  std::vector<std::string> metric_files;

  auto* sim = app.add_subcommand("simulate", "simulate a scenario and write sensors.csv and truth.csv");
  sim->add_option("-s,--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out_dir, "output directory")->required();
  sim->add_option("--seed", seed, "override the scenario seed");

  auto* est = app.add_subcommand("estimate", "run the estimators on a sensor CSV");
  est->add_option("-s,--scenario", scenario, "scenario file (filter settings and commanded gait)")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("-i,--sensors", sensors, "sensor CSV")->required();
  est->add_option("-o,--out", out_dir, "output directory")->required();
  est->add_option("-e,--estimators", estimators, "imm, baseline or both")
      ->check(CLI::IsMember({"imm", "baseline", "both"}));

  auto* run = app.add_subcommand("run", "simulate, estimate and compute metrics");
  run->add_option("-s,--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--seeds", seeds_text, "batch over seeds, e.g. 1-5 or 1,4,9; one subdirectory per seed")
      ->excludes(seed_opt);

  auto* rep = app.add_subcommand("report", "summarize metrics.txt files across runs");
  rep->add_option("metrics", metric_files, "metrics files")->required();
  rep->add_option("-o,--out", report_out, "also write the summary to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) {
      const auto cfg = load(scenario, seed);
      const auto trace = ci::simulate_to(cfg, out_dir);
      std::cout << "wrote " << trace.size() << " ticks to " << out_dir << '\n';
    } else if (*est) {
      auto cfg = load(scenario, seed);
      if (!estimators.empty()) cfg.estimators = ci::parse_estimators(estimators);
      const auto res = ci::estimate_to(cfg, sensors, out_dir);
      const std::size_t n = res.imm ? res.imm->samples.size() : res.baseline->samples.size();
      std::cout << "estimated " << n << " ticks into " << out_dir << '\n';
    } else if (*run) {
      if (!seeds_text.empty()) return run_batch(scenario, parse_seed_list(seeds_text), out_dir);
      const auto kv = ci::run_pipeline(load(scenario, seed), out_dir);
      std::cout << "results in " << out_dir << '\n';
      print_summary(kv);
    } else if (*rep) {
      const std::string summary = ci::report(metric_files);
      std::cout << summary;
      if (!report_out.empty()) {
        auto f = ci::open_output(report_out);
        f << summary;
      }
    }
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    std::cerr << kind(code) << ": " << e.what() << '\n';
    return code;
  }
  return 0;
}
