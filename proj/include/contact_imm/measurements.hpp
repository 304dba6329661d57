#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "contact_imm/model.hpp"
#include "contact_imm/rotation.hpp"
#include "contact_imm/types.hpp"

namespace contact_imm {

/// Process noise, base measurement noise, and the contact-confidence threshold.
/// `r_base` holds the diagonal of R at r_scale = 1.
struct NoiseConfig {
  StateVec q_diag;
  MeasVec r_base;
  double p_bar = 0.6;
  /// Extra inflation applied to the pseudo channels when no leg is confidently in contact.
  double flight_inflation = 1e3;

  static NoiseConfig standard() {
    NoiseConfig n;
    n.q_diag << 1, 1, 1, 10, 10, 10, 1, 1, 1, 0.01, 0.01, 0.01;
    n.q_diag *= 1e-2;
    n.r_base << 1, 1, 1, 1e4, 1e4, 10, 1, 1, 1, 1e4, 1e4, 1e4, 1, 1, 1;
    n.r_base *= 1e-4;
    return n;
  }

  [[nodiscard]] StateMat q() const { return q_diag.asDiagonal(); }

  void validate() const {
    if (!(q_diag.array() > 0.0).all() || !q_diag.allFinite()) throw ConfigError("Q diagonal must be positive");
    if (!(r_base.array() > 0.0).all() || !r_base.allFinite()) throw ConfigError("R diagonal must be positive");
    if (!(p_bar >= 0.0 && p_bar < 1.0)) throw ConfigError("contact threshold must lie in [0, 1)");
  }
};

/// h(p) = max(p - p_bar, 0).
inline double contact_weight(double p, double p_bar) { return std::max(p - p_bar, 0.0); }

inline double total_weight(const Vec4& p, double p_bar) {
  double sum = 0.0;
  for (int i = 0; i < kNumLegs; ++i) sum += contact_weight(p(i), p_bar);
  return sum;
}

/// r_scale = 1 / (1 + 100 sum_i h(p_i)).
inline double r_scale(const Vec4& p, double p_bar) { return 1.0 / (1.0 + 100.0 * total_weight(p, p_bar)); }

struct PseudoMeasurement {
  Vec3 value = Vec3::Zero();
  bool valid = false;
};

namespace detail {

template <typename PerLegTerm>
PseudoMeasurement weighted_negative_average(const Vec4& p, const Vec3& theta_hat, double p_bar, PerLegTerm term) {
  const double total = total_weight(p, p_bar);
  if (!(total > 0.0)) return {};
  const Mat3 r = rotation_bf_to_wf(theta_hat);
  Vec3 acc = Vec3::Zero();
  for (Leg leg : kLegs) {
    const double h = contact_weight(p(index_of(leg)), p_bar);
    if (h > 0.0) acc += h * (r * term(leg));
  }
  return {-acc / total, true};
}

}  // namespace detail

/// Trunk velocity (world frame) implied by stationary contact feet.
inline PseudoMeasurement pseudo_velocity(const RobotParams& params, const PerLeg<LegState>& legs, const Vec4& p,
                                         const Vec3& theta_hat, double p_bar) {
  return detail::weighted_negative_average(p, theta_hat, p_bar, [&](Leg leg) {
    const auto& s = legs[static_cast<size_t>(index_of(leg))];
    return foot_velocity(params, leg, s.q, s.q_dot);
  });
}

/// Trunk position relative to the weighted foothold centroid; z is the
/// height above the ground plane.
inline PseudoMeasurement pseudo_position(const RobotParams& params, const PerLeg<LegState>& legs, const Vec4& p,
                                         const Vec3& theta_hat, double p_bar) {
  return detail::weighted_negative_average(p, theta_hat, p_bar, [&](Leg leg) {
    return forward_kinematics(params, leg, legs[static_cast<size_t>(index_of(leg))].q);
  });
}

inline bool is_pseudo_index(int i) {
  return (i >= kMeasPosIdx && i < kMeasPosIdx + 3) || (i >= kMeasVelIdx && i < kMeasVelIdx + 3);
}

/// Diagonal R with the pseudo position/velocity entries scaled by r_scale.
/// When the pseudo channels are stale, they use the base values inflated by
/// `flight_inflation`.
inline MeasMat build_R(const NoiseConfig& noise, double scale, bool pseudo_valid = true) {
  MeasVec diag = noise.r_base;
  for (int i = 0; i < kMeasDim; ++i) {
    if (!is_pseudo_index(i)) continue;
    diag(i) *= pseudo_valid ? scale : noise.flight_inflation;
  }
  return diag.asDiagonal();
}

/// Raw sensor channels of one tick.
struct SensorSample {
  double t = 0.0;
  Vec3 theta = Vec3::Zero();  // Euler angles
  Vec3 accel = Vec3::Zero();  // body frame
  Vec3 omega = Vec3::Zero();  // body frame
  PerLeg<LegState> legs{};

  [[nodiscard]] bool finite() const {
    if (!std::isfinite(t) || !theta.allFinite() || !accel.allFinite() || !omega.allFinite()) return false;
    return std::all_of(legs.begin(), legs.end(), [](const LegState& s) { return s.finite(); });
  }
};

/// Last valid pseudo measurements, held through phases without confident contact.
struct HeldPseudo {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

struct MeasurementBundle {
  SensorSample raw;
  MeasVec y = MeasVec::Zero();
  double r_scale = 1.0;
  bool pseudo_valid = false;
};

/// Stacks y = [theta; p~; omega_bf; v~; a_bf]. Updates `held` when the pseudo
/// channels are valid and reuses it otherwise.
inline MeasurementBundle assemble(const SensorSample& raw, const Vec4& p, const Vec3& theta_hat,
                                  const RobotParams& params, double p_bar, HeldPseudo& held) {
  if (!raw.finite()) throw NonFiniteMeasurement("sensor sample at t=" + std::to_string(raw.t) + " is not finite");
  MeasurementBundle b;
  b.raw = raw;
  const PseudoMeasurement pos = pseudo_position(params, raw.legs, p, theta_hat, p_bar);
  const PseudoMeasurement vel = pseudo_velocity(params, raw.legs, p, theta_hat, p_bar);
  b.pseudo_valid = pos.valid && vel.valid;
  if (b.pseudo_valid) {
    held.position = pos.value;
    held.velocity = vel.value;
    b.r_scale = r_scale(p, p_bar);
  } else {
    b.r_scale = 1.0;
  }
  b.y << raw.theta, held.position, raw.omega, held.velocity, raw.accel;
  return b;
}

}  // namespace contact_imm
