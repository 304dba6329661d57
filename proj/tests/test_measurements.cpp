#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "contact_imm/dynamics.hpp"
#include "contact_imm/measurements.hpp"

using namespace contact_imm;

namespace {

const RobotParams kRobot;

LegState leg_at(Leg leg, const Vec3& foot_bf, const Vec3& foot_vel_bf = Vec3::Zero()) {
  LegState s;
  const auto q = inverse_kinematics(kRobot, leg, foot_bf);
  EXPECT_TRUE(q.has_value());
  s.q = *q;
  s.q_dot = jacobian(kRobot, leg, s.q).partialPivLu().solve(foot_vel_bf);
  return s;
}

// Feet under the hips at the given depth.
PerLeg<LegState> stance_legs(double depth) {
  PerLeg<LegState> legs;
  for (Leg leg : kLegs) {
    const Vec3 hip = kRobot.hip_offset(leg);
    legs[static_cast<size_t>(index_of(leg))] =
        leg_at(leg, Vec3(hip.x(), hip.y() + RobotParams::side(leg) * kRobot.l_hip, -depth));
  }
  return legs;
}

}  // namespace

TEST(ContactWeight, Examples) {
  EXPECT_EQ(contact_weight(0.6, 0.6), 0.0);
  EXPECT_NEAR(contact_weight(0.95, 0.6), 0.35, 1e-15);
  EXPECT_EQ(contact_weight(0.2, 0.6), 0.0);
}

TEST(RScale, Examples) {
  EXPECT_EQ(r_scale(Vec4::Zero(), 0.6), 1.0);
  EXPECT_NEAR(r_scale(Vec4::Ones(), 0.6), 1.0 / 161.0, 1e-15);
  EXPECT_NEAR(r_scale(Vec4(0.95, 0.0, 0.95, 0.1), 0.6), 1.0 / 71.0, 1e-15);
}

TEST(RScale, MonotoneInConfidence) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 500; ++n) {
    Vec4 p(u(rng), u(rng), u(rng), u(rng));
    const double s = r_scale(p, 0.6);
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
    p(n % 4) = std::min(1.0, p(n % 4) + 0.1);
    EXPECT_LE(r_scale(p, 0.6), s);
  }
}

TEST(PseudoVelocity, SingleLegSignFlip) {
  PerLeg<LegState> legs = stance_legs(0.3);
  legs[0] = leg_at(Leg::FL, forward_kinematics(kRobot, Leg::FL, legs[0].q), Vec3(-0.5, 0.0, 0.0));
  const auto v = pseudo_velocity(kRobot, legs, Vec4(1.0, 0.0, 0.0, 0.0), Vec3::Zero(), 0.6);
  ASSERT_TRUE(v.valid);
  EXPECT_LT((v.value - Vec3(0.5, 0.0, 0.0)).norm(), 1e-12);
}

TEST(PseudoVelocity, OpposingFeetCancel) {
  PerLeg<LegState> legs = stance_legs(0.3);
  const Vec3 v(0.2, -0.1, 0.05);
  legs[1] = leg_at(Leg::FR, forward_kinematics(kRobot, Leg::FR, legs[1].q), v);
  legs[2] = leg_at(Leg::RL, forward_kinematics(kRobot, Leg::RL, legs[2].q), -v);
  const auto out = pseudo_velocity(kRobot, legs, Vec4(0.0, 0.9, 0.9, 0.0), Vec3(0.1, -0.2, 0.3), 0.6);
  ASSERT_TRUE(out.valid);
  EXPECT_LT(out.value.norm(), 1e-12);
}

TEST(PseudoVelocity, FlightIsInvalid) {
  const auto out = pseudo_velocity(kRobot, stance_legs(0.3), Vec4::Constant(0.55), Vec3::Zero(), 0.6);
  EXPECT_FALSE(out.valid);
}

TEST(PseudoPosition, SymmetricStanceHeight) {
  const auto out = pseudo_position(kRobot, stance_legs(0.3), Vec4::Ones(), Vec3::Zero(), 0.6);
  ASSERT_TRUE(out.valid);
  EXPECT_LT((out.value - Vec3(0.0, 0.0, 0.3)).norm(), 1e-12);
}

TEST(PseudoPosition, SingleLegNegation) {
  PerLeg<LegState> legs = stance_legs(0.3);
  legs[0] = leg_at(Leg::FL, Vec3(0.2, 0.15, -0.3));
  const auto out = pseudo_position(kRobot, legs, Vec4(1.0, 0.1, 0.2, 0.0), Vec3::Zero(), 0.6);
  ASSERT_TRUE(out.valid);
  EXPECT_LT((out.value - Vec3(-0.2, -0.15, 0.3)).norm(), 1e-12);
}

TEST(PseudoPosition, RotatesIntoWorld) {
  PerLeg<LegState> legs = stance_legs(0.3);
  legs[0] = leg_at(Leg::FL, Vec3(0.2, 0.15, -0.3));
  const Vec3 th(0.1, -0.2, 0.4);
  const auto out = pseudo_position(kRobot, legs, Vec4(1.0, 0.0, 0.0, 0.0), th, 0.6);
  EXPECT_LT((out.value + rotation_bf_to_wf(th) * Vec3(0.2, 0.15, -0.3)).norm(), 1e-12);
}

TEST(PseudoPosition, NoConfidentLegIsInvalid) {
  EXPECT_FALSE(pseudo_position(kRobot, stance_legs(0.3), Vec4::Zero(), Vec3::Zero(), 0.6).valid);
}

TEST(BuildR, BaseValues) {
  const NoiseConfig n = NoiseConfig::standard();
  const MeasMat r = build_R(n, 1.0);
  EXPECT_NEAR(r(3, 3), 1.0, 1e-15);
  EXPECT_NEAR(r(4, 4), 1.0, 1e-15);
  EXPECT_NEAR(r(5, 5), 1e-3, 1e-18);
  EXPECT_NEAR(r(0, 0), 1e-4, 1e-18);
  EXPECT_NEAR(r(14, 14), 1e-4, 1e-18);
  EXPECT_TRUE(MeasMat(r - MeasMat(r.diagonal().asDiagonal())).isZero(0.0));
}

TEST(BuildR, ScaleOnlyTouchesPseudoChannels) {
  const NoiseConfig n = NoiseConfig::standard();
  const MeasMat a = build_R(n, 1.0), b = build_R(n, 1e-9);
  for (int i = 0; i < kMeasDim; ++i) {
    if (is_pseudo_index(i)) {
      EXPECT_NEAR(b(i, i), 1e-9 * a(i, i), 1e-24);
    } else {
      EXPECT_EQ(a(i, i), b(i, i));
    }
  }
}

TEST(BuildR, StaleChannelsAreInflated) {
  const NoiseConfig n = NoiseConfig::standard();
  const MeasMat r = build_R(n, 0.01, false);
  EXPECT_NEAR(r(3, 3), 1e3, 1e-9);
  EXPECT_NEAR(r(0, 0), 1e-4, 1e-18);
}

TEST(NoiseConfig, StandardValues) {
  const NoiseConfig n = NoiseConfig::standard();
  EXPECT_NEAR(n.q_diag(0), 1e-2, 1e-18);
  EXPECT_NEAR(n.q_diag(3), 1e-1, 1e-17);
  EXPECT_NEAR(n.q_diag(9), 1e-4, 1e-19);
  NoiseConfig bad = n;
  bad.q_diag(2) = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = n;
  bad.p_bar = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Assemble, StationaryExactSensorsGiveZeroResidual) {
  SensorSample raw;
  raw.legs = stance_legs(0.3);
  raw.accel = Vec3(0.0, 0.0, 9.81);
  HeldPseudo held;
  const auto b = assemble(raw, Vec4::Ones(), Vec3::Zero(), kRobot, 0.6, held);
  ASSERT_TRUE(b.pseudo_valid);
  EXPECT_NEAR(b.r_scale, 1.0 / 161.0, 1e-15);

  TrunkState truth;
  truth.d_com = Vec3(0.0, 0.0, 0.3);
  ForceEstimate f;
  for (auto& v : f.force) v = Vec3(0.0, 0.0, kRobot.mass * 9.81 / 4.0);
  const MeasVec residual = b.y - build_C(Vec3::Zero()) * truth.stacked() -
                           build_D(ModeSet::standard()[7], kRobot.mass) * f.stacked();
  EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Assemble, FlightHoldsLastPseudoValues) {
  SensorSample raw;
  raw.legs = stance_legs(0.3);
  HeldPseudo held;
  const auto first = assemble(raw, Vec4::Ones(), Vec3::Zero(), kRobot, 0.6, held);
  raw.legs = stance_legs(0.25);
  const auto flight = assemble(raw, Vec4::Constant(0.3), Vec3::Zero(), kRobot, 0.6, held);
  EXPECT_FALSE(flight.pseudo_valid);
  EXPECT_EQ(flight.r_scale, 1.0);
  EXPECT_EQ(flight.y.segment<3>(kMeasPosIdx), first.y.segment<3>(kMeasPosIdx));
  EXPECT_EQ(flight.y.segment<3>(kMeasVelIdx), first.y.segment<3>(kMeasVelIdx));
}

TEST(Assemble, StacksChannelsInOrder) {
  SensorSample raw;
  raw.legs = stance_legs(0.3);
  raw.theta = Vec3(0.01, 0.02, 0.03);
  raw.omega = Vec3(0.4, 0.5, 0.6);
  raw.accel = Vec3(0.7, 0.8, 9.9);
  HeldPseudo held;
  const auto b = assemble(raw, Vec4::Ones(), raw.theta, kRobot, 0.6, held);
  EXPECT_EQ(b.y.segment<3>(kMeasThetaIdx), raw.theta);
  EXPECT_EQ(b.y.segment<3>(kMeasOmegaIdx), raw.omega);
  EXPECT_EQ(b.y.segment<3>(kMeasAccelIdx), raw.accel);
  EXPECT_EQ(b.y.segment<3>(kMeasPosIdx), held.position);
}

TEST(Assemble, NonFiniteSampleThrows) {
  SensorSample raw;
  raw.legs = stance_legs(0.3);
  raw.omega.y() = NAN;
  HeldPseudo held;
  EXPECT_THROW(assemble(raw, Vec4::Ones(), Vec3::Zero(), kRobot, 0.6, held), NonFiniteMeasurement);
}
