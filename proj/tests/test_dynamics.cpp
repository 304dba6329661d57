#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "contact_imm/dynamics.hpp"

using namespace contact_imm;

namespace {

FootPositions symmetric_feet() {
  return {Vec3(0.2, 0.15, -0.3), Vec3(0.2, -0.15, -0.3), Vec3(-0.2, 0.15, -0.3), Vec3(-0.2, -0.15, -0.3)};
}

ContactMode mode_of(const PerLeg<bool>& d) { return ContactMode{d, 0}; }

Vec3 random_theta(std::mt19937& rng) {
  std::uniform_real_distribution<double> a(-0.6, 0.6);
  return {a(rng), a(rng), 3.0 * a(rng)};
}

}  // namespace

TEST(ModeSet, DefaultOrderAndMembership) {
  const ModeSet m = ModeSet::standard();
  ASSERT_EQ(m.size(), 8);
  EXPECT_EQ(m[0].num_contacts(), 0);
  EXPECT_EQ(m[7].num_contacts(), 4);
  EXPECT_EQ(m.find({false, true, true, false}), 1);
  EXPECT_EQ(m.find({true, false, false, true}), 3);
  EXPECT_EQ(m.find({true, true, false, true}), 5);
  EXPECT_FALSE(m.find({true, false, false, false}).has_value());
  for (int k = 0; k < m.size(); ++k) EXPECT_EQ(m[k].index, k);
}

TEST(ModeSet, FullHasAllSixteenPatterns) {
  const ModeSet m = ModeSet::full();
  ASSERT_EQ(m.size(), 16);
  EXPECT_EQ(m.find({true, false, true, false}), 10);
  EXPECT_THROW(ModeSet::by_name("nine"), ConfigError);
  EXPECT_THROW(ModeSet({{true, true, true, true}, {true, true, true, true}}), ConfigError);
}

TEST(TrunkState, StackRoundTrip) {
  StateVec x;
  for (int i = 0; i < kStateDim; ++i) x(i) = i + 1;
  EXPECT_EQ(TrunkState::from(x).stacked(), x);
  EXPECT_EQ(TrunkState::from(x).v_com, Vec3(10, 11, 12));
}

TEST(BuildA, ZeroAngles) {
  StateMat expected = StateMat::Zero();
  expected.block<3, 3>(kThetaIdx, kOmegaIdx).setIdentity();
  expected.block<3, 3>(kPosIdx, kVelIdx).setIdentity();
  EXPECT_EQ(build_A(Vec3::Zero()), expected);
}

TEST(BuildA, VelocityIntegratesIntoPosition) {
  StateVec x = StateVec::Zero();
  x.segment<3>(kVelIdx) = Vec3(0.3, -1.0, 2.0);
  const StateVec dx = build_A(Vec3(0.1, 0.2, 0.3)) * x;
  EXPECT_EQ(Vec3(dx.segment<3>(kPosIdx)), Vec3(0.3, -1.0, 2.0));
}

TEST(BuildA, RankSix) {
  std::mt19937 rng(1);
  for (int k = 0; k < 20; ++k) {
    const Eigen::FullPivLU<StateMat> lu(build_A(random_theta(rng)));
    EXPECT_EQ(lu.rank(), 6);
  }
}

TEST(BuildB, NoContactIsZero) {
  const RobotParams p;
  EXPECT_TRUE(build_B(Vec3(0.1, 0.0, 0.2), symmetric_feet(), ModeSet::standard()[0], p).isZero(0.0));
}

TEST(BuildB, SymmetricFullStance) {
  const RobotParams p;
  std::mt19937 rng(2);
  const double f = 29.43;
  ForceEstimate forces;
  for (auto& v : forces.force) v = Vec3(0.0, 0.0, f);
  for (int k = 0; k < 10; ++k) {
    const Vec3 th = random_theta(rng);
    const StateVec out = build_B(th, symmetric_feet(), ModeSet::standard()[7], p) * forces.stacked();
    EXPECT_LT(Vec3(out.segment<3>(kOmegaIdx)).norm(), 1e-12);
    EXPECT_LT((Vec3(out.segment<3>(kVelIdx)) - rotation_bf_to_wf(th) * Vec3(0, 0, 4.0 * f / p.mass)).norm(), 1e-12);
  }
}

TEST(BuildB, SingleLegMoment) {
  const double F = 40.0;
  FootPositions feet = symmetric_feet();
  feet[0] = Vec3(0.2, 0.1, -0.3);
  ForceEstimate forces;
  forces.force[0] = Vec3(0.0, 0.0, F);
  const Vec<6> wrench = build_B2(feet, mode_of({true, false, false, false})) * forces.stacked();
  EXPECT_LT((Vec3(wrench.head<3>()) - Vec3(0.1 * F, -0.2 * F, 0.0)).norm(), 1e-12);
  EXPECT_EQ(Vec3(wrench.tail<3>()), Vec3(0.0, 0.0, F));
}

TEST(BuildB, IgnoresForcesOfLegsOutOfContact) {
  const RobotParams p;
  ForceEstimate forces;
  forces.force[1] = Vec3(5.0, 6.0, 7.0);
  const StateVec out =
      build_B(Vec3::Zero(), symmetric_feet(), mode_of({true, false, true, true}), p) * forces.stacked();
  EXPECT_TRUE(out.isZero(0.0));
}

TEST(Discretize, NullDynamicsIsIdentity) {
  const auto dm = discretize(StateMat::Zero(), StateMat::Zero(), Vec3::Zero(), 0.005);
  EXPECT_EQ(dm.Ad, StateMat::Identity());
  EXPECT_TRUE(dm.Bd.isZero(0.0));
  EXPECT_TRUE(dm.gd.isZero(0.0));
}

TEST(Discretize, EulerStepAdvancesPosition) {
  const double ts = 0.005;
  const auto dm = discretize(build_A(Vec3::Zero()), StateMat::Zero(), Vec3::Zero(), ts);
  StateVec x = StateVec::Zero();
  x(kVelIdx) = 1.0;
  for (int k = 1; k <= 3; ++k) {
    x = dm.Ad * x + dm.gd;
    EXPECT_NEAR(x(kPosIdx), k * ts, 1e-15);
    EXPECT_EQ(x(kPosIdx + 1), 0.0);
    EXPECT_EQ(x(kPosIdx + 2), 0.0);
  }
}

TEST(Discretize, GravityEntersVelocityBlock) {
  const auto dm = discretize(StateMat::Zero(), StateMat::Zero(), Vec3(0, 0, -9.81), 0.01);
  EXPECT_NEAR(dm.gd(kVelIdx + 2), -0.0981, 1e-15);
  EXPECT_EQ(dm.gd.head<9>(), Vec<9>::Zero());
}

TEST(Discretize, TwoHalfStepsAgreeWithOneStepToSecondOrder) {
  // The difference between one Euler step of 2h and two of h is exactly
  // h^2 * (A^2 x + A b); shrinking h by 10 shrinks it by 100.
  std::mt19937 rng(9);
  const Vec3 th = random_theta(rng);
  const StateMat a = build_A(th);
  StateVec x0;
  for (int i = 0; i < kStateDim; ++i) x0(i) = std::uniform_real_distribution<double>(-1, 1)(rng);
  auto gap = [&](double h) {
    const auto one = discretize(a, StateMat::Zero(), Vec3(0, 0, -9.81), 2.0 * h);
    const auto half = discretize(a, StateMat::Zero(), Vec3(0, 0, -9.81), h);
    const StateVec x1 = one.Ad * x0 + one.gd;
    const StateVec x2 = half.Ad * (half.Ad * x0 + half.gd) + half.gd;
    return (x1 - x2).norm();
  };
  const double g1 = gap(0.01), g2 = gap(0.001);
  EXPECT_GT(g1, 0.0);
  EXPECT_NEAR(g1 / g2, 100.0, 1e-3);
  const StateVec expected = 0.01 * 0.01 * (a * a * x0 + a * gravity_input(Vec3(0, 0, -9.81)));
  EXPECT_NEAR(g1, expected.norm(), 1e-12);
}

TEST(Discretize, RejectsNonPositivePeriod) {
  EXPECT_THROW(discretize(StateMat::Zero(), StateMat::Zero(), Vec3::Zero(), 0.0), ConfigError);
}

TEST(BuildC, ZeroAngles) {
  const ObsMat c = build_C(Vec3::Zero());
  EXPECT_TRUE(c.topRows<12>().isIdentity(0.0));
  EXPECT_TRUE(c.bottomRows<3>().isZero(0.0));
}

TEST(BuildC, GyroRowsRotateIntoBody) {
  const Vec3 th(0.2, -0.1, 1.0);
  EXPECT_EQ(Mat3(build_C(th).block<3, 3>(kMeasOmegaIdx, kOmegaIdx)), rotation_wf_to_bf(th));
}

TEST(BuildD, AllContactsGiveInverseMassBlocks) {
  const double m = 12.0;
  const Mat<15, 12> d = build_D(ModeSet::standard()[7], m);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(Mat3(d.block<3, 3>(kMeasAccelIdx, 3 * i)), Mat3(Mat3::Identity() / m));
  }
  EXPECT_TRUE(d.topRows<12>().isZero(0.0));
}

TEST(BuildD, FlightPredictsZeroAcceleration) {
  const Mat<15, 12> d = build_D(ModeSet::standard()[0], 12.0);
  EXPECT_TRUE(d.isZero(0.0));
  ForceEstimate forces;
  for (auto& f : forces.force) f = Vec3(1.0, 2.0, 30.0);
  EXPECT_TRUE((d * forces.stacked()).isZero(0.0));
}
