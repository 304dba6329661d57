#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "contact_imm/types.hpp"

namespace contact_imm {

/// Contact change on one leg and how long the estimator took to follow it.
struct LatencyEvent {
  Leg leg = Leg::FL;
  std::size_t tick = 0;  // first tick with the new true flag
  bool touchdown = true;
  std::optional<std::size_t> latency_ticks;  // empty if never detected before the next change
};

struct Metrics {
  std::size_t ticks = 0;
  double full_rmse = 0.0;      // all 12 components, unweighted mixed units
  double theta_rmse = 0.0;     // rad
  double position_rmse = 0.0;  // m
  double omega_rmse = 0.0;     // rad/s
  double velocity_rmse = 0.0;  // m/s
  double z_rmse_cm = 0.0;
  double z_max_cm = 0.0;
  std::vector<LatencyEvent> events;
};

struct TimingStats {
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double max_ms = 0.0;
};

inline constexpr double kDetectionThreshold = 0.6;

namespace detail {

inline double block_rmse(const std::vector<StateVec>& truth, const std::vector<StateVec>& est, int start, int len,
                         std::size_t from) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = from; k < truth.size(); ++k) {
    sum += (truth[k].segment(start, len) - est[k].segment(start, len)).squaredNorm();
    count += static_cast<std::size_t>(len);
  }
  return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

}  // namespace detail

/// Every true contact change with the number of ticks until p_i crosses
/// `threshold` in the matching direction.
inline std::vector<LatencyEvent> detection_latencies(const std::vector<PerLeg<bool>>& contacts,
                                                     const std::vector<Vec4>& prob,
                                                     double threshold = kDetectionThreshold) {
  if (contacts.size() != prob.size()) throw LengthMismatch("contact flags and probabilities differ in length");
  std::vector<LatencyEvent> out;
  for (Leg leg : kLegs) {
    const auto i = static_cast<size_t>(index_of(leg));
    for (std::size_t k = 1; k < contacts.size(); ++k) {
      if (contacts[k][i] == contacts[k - 1][i]) continue;
      LatencyEvent e{leg, k, contacts[k][i], std::nullopt};
      for (std::size_t j = k; j < contacts.size(); ++j) {
        if (j > k && contacts[j][i] != contacts[k][i]) break;
        const double p = prob[j](index_of(leg));
        if (e.touchdown ? p >= threshold : p < threshold) {
          e.latency_ticks = j - k;
          break;
        }
      }
      out.push_back(e);
    }
  }
  std::sort(out.begin(), out.end(), [](const LatencyEvent& a, const LatencyEvent& b) {
    return a.tick != b.tick ? a.tick < b.tick : index_of(a.leg) < index_of(b.leg);
  });
  return out;
}

/// Errors of `est` against `truth`, skipping the first `warmup` ticks in the RMSE terms.
inline Metrics compute_metrics(const std::vector<StateVec>& truth, const std::vector<StateVec>& est,
                               const std::vector<PerLeg<bool>>& contacts, const std::vector<Vec4>& prob,
                               std::size_t warmup = 0) {
  if (truth.size() != est.size() || truth.size() != contacts.size() || truth.size() != prob.size()) {
    throw LengthMismatch("truth, estimates, contacts and probabilities must have equal length");
  }
  Metrics m;
  m.ticks = truth.size();
  const std::size_t from = std::min(warmup, truth.size());
  m.full_rmse = detail::block_rmse(truth, est, 0, kStateDim, from);
  m.theta_rmse = detail::block_rmse(truth, est, kThetaIdx, 3, from);
  m.position_rmse = detail::block_rmse(truth, est, kPosIdx, 3, from);
  m.omega_rmse = detail::block_rmse(truth, est, kOmegaIdx, 3, from);
  m.velocity_rmse = detail::block_rmse(truth, est, kVelIdx, 3, from);
  m.z_rmse_cm = 100.0 * detail::block_rmse(truth, est, kPosIdx + 2, 1, from);
  for (std::size_t k = from; k < truth.size(); ++k) {
    m.z_max_cm = std::max(m.z_max_cm, 100.0 * std::abs(truth[k](kPosIdx + 2) - est[k](kPosIdx + 2)));
  }
  m.events = detection_latencies(contacts, prob);
  return m;
}

inline TimingStats timing_stats(std::vector<double> step_ms) {
  TimingStats s;
  if (step_ms.empty()) return s;
  double sum = 0.0;
  for (double v : step_ms) sum += v;
  s.mean_ms = sum / static_cast<double>(step_ms.size());
  s.max_ms = *std::max_element(step_ms.begin(), step_ms.end());
  const std::size_t mid = step_ms.size() / 2;
  std::nth_element(step_ms.begin(), step_ms.begin() + static_cast<std::ptrdiff_t>(mid), step_ms.end());
  const double upper = step_ms[mid];
  if (step_ms.size() % 2 == 1) {
    s.median_ms = upper;
  } else {
    const double lower = *std::max_element(step_ms.begin(), step_ms.begin() + static_cast<std::ptrdiff_t>(mid));
    s.median_ms = 0.5 * (lower + upper);
  }
  return s;
}

}  // namespace contact_imm
