#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contact_imm/model.hpp"
#include "contact_imm/rotation.hpp"
#include "contact_imm/types.hpp"

namespace contact_imm {

/// Trunk state. Stacks as [theta; d_com; omega; v_com] with omega and v_com
/// expressed in the world frame.
struct TrunkState {
  Vec3 theta = Vec3::Zero();
  Vec3 d_com = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec3 v_com = Vec3::Zero();

  [[nodiscard]] StateVec stacked() const {
    StateVec x;
    x << theta, d_com, omega, v_com;
    return x;
  }

  [[nodiscard]] static TrunkState from(const StateVec& x) {
    return {x.segment<3>(kThetaIdx), x.segment<3>(kPosIdx), x.segment<3>(kOmegaIdx),
            x.segment<3>(kVelIdx)};
  }
};

/// One contact configuration of the switched model.
struct ContactMode {
  PerLeg<bool> delta{};
  int index = 0;

  [[nodiscard]] bool contact(Leg leg) const { return delta[index_of(leg)]; }
  [[nodiscard]] int num_contacts() const {
    int n = 0;
    for (bool d : delta) n += d ? 1 : 0;
    return n;
  }
};

inline bool same_pattern(const PerLeg<bool>& a, const PerLeg<bool>& b) { return a == b; }

class ModeSet {
 public:
  ModeSet() = default;

  /// Builds a set from contact patterns; indices are assigned 0..M-1 in order.
  explicit ModeSet(const std::vector<PerLeg<bool>>& patterns) {
    if (patterns.empty()) throw ConfigError("mode set must contain at least one mode");
    for (const auto& p : patterns) {
      if (find(p)) throw ConfigError("duplicate contact pattern in mode set");
      modes_.push_back(ContactMode{p, static_cast<int>(modes_.size())});
    }
  }

  /// The eight trot/walk modes in their documented order:
  /// 1 none, 2 FR+RL, 3 FR+RL+RR, 4 FL+RR, 5 FL+RL+RR, 6 FL+FR+RR, 7 FL+FR+RL, 8 all.
  static ModeSet standard() {
    return ModeSet({{false, false, false, false},
                    {false, true, true, false},
                    {false, true, true, true},
                    {true, false, false, true},
                    {true, false, true, true},
                    {true, true, false, true},
                    {true, true, true, false},
                    {true, true, true, true}});
  }

  /// All sixteen patterns; mode k-1 has binary digits (FL FR RL RR).
  static ModeSet full() {
    std::vector<PerLeg<bool>> patterns;
    for (int k = 0; k < 16; ++k) {
      patterns.push_back({(k & 8) != 0, (k & 4) != 0, (k & 2) != 0, (k & 1) != 0});
    }
    return ModeSet(patterns);
  }

  static ModeSet by_name(const std::string& name) {
    if (name == "trot8" || name == "default") return standard();
    if (name == "full16") return full();
    throw ConfigError("unknown mode set '" + name + "' (expected trot8 or full16)");
  }

  [[nodiscard]] int size() const { return static_cast<int>(modes_.size()); }
  [[nodiscard]] const ContactMode& operator[](int k) const { return modes_.at(static_cast<size_t>(k)); }
  [[nodiscard]] const std::vector<ContactMode>& modes() const { return modes_; }

  [[nodiscard]] std::optional<int> find(const PerLeg<bool>& pattern) const {
    for (const auto& m : modes_) {
      if (m.delta == pattern) return m.index;
    }
    return std::nullopt;
  }

 private:
  std::vector<ContactMode> modes_;
};

using FootPositions = PerLeg<Vec3>;

/// Per-leg hypothetical forces (body frame) with validity flags.
struct ForceEstimate {
  PerLeg<Vec3> force{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  PerLeg<bool> valid{true, true, true, true};

  [[nodiscard]] Vec<12> stacked() const {
    Vec<12> f;
    for (int i = 0; i < kNumLegs; ++i) f.segment<3>(3 * i) = force[static_cast<size_t>(i)];
    return f;
  }
};

/// Continuous-time system matrix: theta_dot = R_wf->bf(theta) * omega, d_dot = v.
inline StateMat build_A(const Vec3& theta) {
  StateMat a = StateMat::Zero();
  a.block<3, 3>(kThetaIdx, kOmegaIdx) = rotation_wf_to_bf(theta);
  a.block<3, 3>(kPosIdx, kVelIdx) = Mat3::Identity();
  return a;
}

/// Maps the body-frame wrench [moment; force] at the CoM into state derivatives.
inline Mat<12, 6> build_B1(const Vec3& theta, const RobotParams& params) {
  const Mat3 r = rotation_bf_to_wf(theta);
  Mat<12, 6> b1 = Mat<12, 6>::Zero();
  b1.block<3, 3>(kOmegaIdx, 0) = r * params.inertia.inverse();
  b1.block<3, 3>(kVelIdx, 3) = r / params.mass;
  return b1;
}

/// Maps stacked foot forces to the body-frame wrench, with the columns of
/// non-contact legs zeroed.
inline Mat<6, 12> build_B2(const FootPositions& feet, const ContactMode& mode) {
  Mat<6, 12> b2 = Mat<6, 12>::Zero();
  for (Leg leg : kLegs) {
    if (!mode.contact(leg)) continue;
    const int i = index_of(leg);
    b2.block<3, 3>(0, 3 * i) = skew(feet[static_cast<size_t>(i)]);
    b2.block<3, 3>(3, 3 * i) = Mat3::Identity();
  }
  return b2;
}

inline StateMat build_B(const Vec3& theta, const FootPositions& feet, const ContactMode& mode,
                        const RobotParams& params) {
  return build_B1(theta, params) * build_B2(feet, mode);
}

/// 12-vector carrying gravity in the velocity-derivative block.
inline StateVec gravity_input(const Vec3& g) {
  StateVec out = StateVec::Zero();
  out.segment<3>(kVelIdx) = g;
  return out;
}

struct DiscreteModel {
  StateMat Ad;
  StateMat Bd;
  StateVec gd;
};

/// Forward-Euler discretization: Ad = I + Ts A, Bd = Ts B, gd = Ts g.
inline DiscreteModel discretize(const StateMat& a, const StateMat& b, const Vec3& g, double ts) {
  if (!(ts > 0.0)) throw ConfigError("sampling period must be positive");
  return {StateMat::Identity() + ts * a, ts * b, ts * gravity_input(g)};
}

inline ObsMat build_C(const Vec3& theta) {
  ObsMat c = ObsMat::Zero();
  c.block<3, 3>(kMeasThetaIdx, kThetaIdx) = Mat3::Identity();
  c.block<3, 3>(kMeasPosIdx, kPosIdx) = Mat3::Identity();
  c.block<3, 3>(kMeasOmegaIdx, kOmegaIdx) = rotation_wf_to_bf(theta);
  c.block<3, 3>(kMeasVelIdx, kVelIdx) = Mat3::Identity();
  return c;
}

/// Feedthrough of the stacked foot forces into the accelerometer rows.
inline Mat<15, 12> build_D(const ContactMode& mode, double mass) {
  Mat<15, 12> d = Mat<15, 12>::Zero();
  for (Leg leg : kLegs) {
    if (mode.contact(leg)) {
      d.block<3, 3>(kMeasAccelIdx, 3 * index_of(leg)) = Mat3::Identity() / mass;
    }
  }
  return d;
}

}  // namespace contact_imm
