#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "contact_imm/types.hpp"

namespace contact_imm {

/// Cross-product matrix: skew(p) * f == p.cross(f).
inline Mat3 skew(const Vec3& p) {
  Mat3 s;
  s << 0.0, -p.z(), p.y(),
       p.z(), 0.0, -p.x(),
       -p.y(), p.x(), 0.0;
  return s;
}

/// Euler angles theta = (roll, pitch, yaw) in the ZYX convention used across
/// the library: R_bf->wf = Rz(yaw) * Ry(pitch) * Rx(roll). A vector expressed
/// in the body frame is mapped into the world frame by this matrix.
inline Mat3 rotation_bf_to_wf(const Vec3& theta) {
  const double cr = std::cos(theta.x()), sr = std::sin(theta.x());
  const double cp = std::cos(theta.y()), sp = std::sin(theta.y());
  const double cy = std::cos(theta.z()), sy = std::sin(theta.z());
  Mat3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp, cp * sr, cp * cr;
  return r;
}

/// Transpose of rotation_bf_to_wf.
inline Mat3 rotation_wf_to_bf(const Vec3& theta) { return rotation_bf_to_wf(theta).transpose(); }

/// Maps ZYX Euler-angle rates to the world-frame angular velocity,
/// omega_wf = E(theta) * theta_dot.
inline Mat3 euler_rate_matrix(const Vec3& theta) {
  const double cp = std::cos(theta.y()), sp = std::sin(theta.y());
  const double cy = std::cos(theta.z()), sy = std::sin(theta.z());
  Mat3 e;
  e << cy * cp, -sy, 0.0,
       sy * cp, cy, 0.0,
       -sp, 0.0, 1.0;
  return e;
}

}  // namespace contact_imm
