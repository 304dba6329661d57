#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "contact_imm/types.hpp"

namespace contact_imm {

/// Physical parameters of the quadruped.
///
/// Every leg is a 3-DOF chain attached at `hip_offset(leg)` from the trunk
/// CoM (body frame): hip roll about body x, then a lateral link of length
/// `l_hip` (pointing +y on left legs, -y on right legs), then hip pitch and
/// knee pitch about y with links `l_thigh` and `l_calf` hanging along -z at
/// zero angles. A knee angle of 0 is the straight-leg singularity; the
/// working range uses negative knee angles.
struct RobotParams {
  double mass = 12.0;
  Mat3 inertia = Vec3(0.0168, 0.0565, 0.0647).asDiagonal();
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  double hip_offset_x = 0.18;
  double hip_offset_y = 0.13;
  double l_hip = 0.08;
  double l_thigh = 0.21;
  double l_calf = 0.21;

  /// Recover foot forces as J^{-T} tau instead of J^{-1} tau.
  bool force_transpose_convention = false;

  [[nodiscard]] static constexpr double side(Leg leg) {
    return (leg == Leg::FL || leg == Leg::RL) ? 1.0 : -1.0;
  }

  [[nodiscard]] Vec3 hip_offset(Leg leg) const {
    const double fore = (leg == Leg::FL || leg == Leg::FR) ? 1.0 : -1.0;
    return {fore * hip_offset_x, side(leg) * hip_offset_y, 0.0};
  }

  [[nodiscard]] double max_reach(Leg leg) const {
    return hip_offset(leg).norm() + l_hip + l_thigh + l_calf;
  }

  void validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("robot mass must be positive");
    if (!inertia.allFinite() || (inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw ConfigError("trunk inertia must be finite and symmetric");
    }
    Eigen::LLT<Mat3> llt(inertia);
    if (llt.info() != Eigen::Success) throw ConfigError("trunk inertia must be positive definite");
    if (!gravity.allFinite()) throw ConfigError("gravity must be finite");
    if (!(l_hip >= 0.0) || !(l_thigh > 0.0) || !(l_calf > 0.0)) {
      throw ConfigError("leg link lengths must be positive");
    }
  }
};

struct LegState {
  Vec3 q = Vec3::Zero();
  Vec3 q_dot = Vec3::Zero();
  Vec3 tau = Vec3::Zero();

  [[nodiscard]] bool finite() const { return q.allFinite() && q_dot.allFinite() && tau.allFinite(); }
};

namespace detail {

// Sagittal-plane foot position before the hip-roll rotation.
inline Vec3 sagittal_chain(const RobotParams& params, Leg leg, const Vec3& q) {
  const double q12 = q.y() + q.z();
  return {-params.l_thigh * std::sin(q.y()) - params.l_calf * std::sin(q12),
          RobotParams::side(leg) * params.l_hip,
          -params.l_thigh * std::cos(q.y()) - params.l_calf * std::cos(q12)};
}

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
  return r;
}

}  // namespace detail

/// Foot position relative to the trunk CoM, body frame.
inline Vec3 forward_kinematics(const RobotParams& params, Leg leg, const Vec3& q) {
  return params.hip_offset(leg) + detail::rot_x(q.x()) * detail::sagittal_chain(params, leg, q);
}

/// Analytic foot Jacobian d(forward_kinematics)/dq.
inline Mat3 jacobian(const RobotParams& params, Leg leg, const Vec3& q) {
  const Mat3 rx = detail::rot_x(q.x());
  const Vec3 rotated = rx * detail::sagittal_chain(params, leg, q);
  const double q12 = q.y() + q.z();
  const double c1 = std::cos(q.y()), s1 = std::sin(q.y());
  const double c12 = std::cos(q12), s12 = std::sin(q12);

  Mat3 j;
  j.col(0) = Vec3(0.0, -rotated.z(), rotated.y());
  j.col(1) = rx * Vec3(-params.l_thigh * c1 - params.l_calf * c12, 0.0,
                       params.l_thigh * s1 + params.l_calf * s12);
  j.col(2) = rx * Vec3(-params.l_calf * c12, 0.0, params.l_calf * s12);
  return j;
}

/// Foot velocity relative to the CoM in the body frame, J(q) * q_dot.
inline Vec3 foot_velocity(const RobotParams& params, Leg leg, const Vec3& q, const Vec3& q_dot) {
  return jacobian(params, leg, q) * q_dot;
}

inline constexpr double kSingularDetThreshold = 1e-9;

struct ForceSolution {
  Vec3 force;
  double condition_number;
};

/// f = J^{-1} tau (or J^{-T} tau when `transpose` is set). Throws
/// SingularJacobian when |det J| < 1e-9.
inline ForceSolution force_from_jacobian(const Mat3& j, const Vec3& tau, bool transpose = false) {
  const double det = j.determinant();
  if (!std::isfinite(det) || std::abs(det) < kSingularDetThreshold) {
    throw SingularJacobian("foot Jacobian is singular (|det J| = " + std::to_string(std::abs(det)) + ")");
  }
  Eigen::JacobiSVD<Mat3> svd(j);
  const Vec3 sv = svd.singularValues();
  const double cond = sv(0) / sv(2);
  const Mat3 a = transpose ? Mat3(j.transpose()) : j;
  const Eigen::PartialPivLU<Mat3> lu(a);
  return {lu.solve(tau), cond};
}

/// Hypothetical contact force of one leg from its joint torques.
inline ForceSolution estimate_contact_force(const RobotParams& params, Leg leg, const Vec3& q,
                                            const Vec3& tau) {
  return force_from_jacobian(jacobian(params, leg, q), tau, params.force_transpose_convention);
}

/// Joint torques that produce foot force `force` under the configured
/// convention, i.e. the exact inverse of estimate_contact_force.
inline Vec3 torques_for_force(const RobotParams& params, Leg leg, const Vec3& q, const Vec3& force) {
  const Mat3 j = jacobian(params, leg, q);
  return params.force_transpose_convention ? Vec3(j.transpose() * force) : Vec3(j * force);
}

/// Closed-form inverse kinematics on the knee-negative branch. Returns
/// nullopt when the target is out of reach.
inline std::optional<Vec3> inverse_kinematics(const RobotParams& params, Leg leg, const Vec3& foot) {
  const Vec3 r = foot - params.hip_offset(leg);
  const double lateral = RobotParams::side(leg) * params.l_hip;
  const double yz2 = r.y() * r.y() + r.z() * r.z();
  const double rem = yz2 - lateral * lateral;
  if (rem <= 0.0) return std::nullopt;
  const double z_sag = -std::sqrt(rem);
  const double roll = std::atan2(r.z(), r.y()) - std::atan2(z_sag, lateral);

  const double x = r.x();
  const double l1 = params.l_thigh, l2 = params.l_calf;
  const double d2 = x * x + z_sag * z_sag;
  const double cos_knee = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (cos_knee > 1.0 || cos_knee < -1.0) return std::nullopt;
  const double knee = -std::acos(cos_knee);
  const double pitch = std::atan2(-x, -z_sag) - std::atan2(l2 * std::sin(knee), l1 + l2 * std::cos(knee));
  const double roll_wrapped = std::remainder(roll, 2.0 * M_PI);
  return Vec3(roll_wrapped, pitch, knee);
}

}  // namespace contact_imm
