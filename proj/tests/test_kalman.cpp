#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "contact_imm/kalman.hpp"

using namespace contact_imm;

namespace {

using G1 = Gaussian<1>;

G1 scalar(double m, double p) {
  G1 g;
  g.mean(0) = m;
  g.cov(0, 0) = p;
  return g;
}

Mat<1, 1> m1(double v) { return Mat<1, 1>::Constant(v); }
Vec<1> v1(double v) { return Vec<1>::Constant(v); }

template <int N>
Mat<N, N> random_spd(std::mt19937& rng, double floor) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat<N, N> a;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) a(i, j) = n(rng);
  return a * a.transpose() + floor * Mat<N, N>::Identity();
}

}  // namespace

TEST(Predict, IdentityDynamicsAddsQ) {
  std::mt19937 rng(1);
  Gaussian<4> g;
  g.mean << 1, 2, 3, 4;
  g.cov = random_spd<4>(rng, 0.1);
  const Mat<4, 4> q = random_spd<4>(rng, 0.1);
  const auto out = predict<4>(g, Mat<4, 4>::Identity(), Vec<4>::Zero(), q);
  EXPECT_EQ(out.mean, g.mean);
  EXPECT_LT((out.cov - g.cov - q).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Predict, ScalarArithmetic) {
  const auto out = predict<1>(scalar(2.0, 1.0), m1(1.0), v1(0.0), m1(0.5));
  EXPECT_DOUBLE_EQ(out.cov(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(out.mean(0), 2.0);
}

TEST(Predict, CovarianceIncrementIsQ) {
  std::mt19937 rng(2);
  Gaussian<6> g;
  g.cov = random_spd<6>(rng, 0.1);
  const Mat<6, 6> ad = random_spd<6>(rng, 0.0);
  const Mat<6, 6> q = random_spd<6>(rng, 0.1);
  const auto out = predict<6>(g, ad, Vec<6>::Ones(), q);
  EXPECT_LT((out.cov - ad * g.cov * ad.transpose() - q).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out.mean - Vec<6>::Ones()).norm(), 1e-15);
}

TEST(Predict, NonFiniteThrows) {
  G1 g = scalar(std::nan(""), 1.0);
  EXPECT_THROW(predict<1>(g, m1(1.0), v1(0.0), m1(1.0)), NonFiniteState);
}

TEST(Update, ScalarHandArithmetic) {
  for (auto form : {CovarianceForm::Joseph, CovarianceForm::Standard}) {
    const auto r = update<1, 1>(scalar(0.0, 1.0), v1(2.0), m1(1.0), v1(0.0), m1(1.0), form);
    EXPECT_DOUBLE_EQ(r.posterior.mean(0), 1.0);
    EXPECT_DOUBLE_EQ(r.posterior.cov(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(r.innovation(0), 2.0);
    EXPECT_DOUBLE_EQ(r.innovation_cov(0, 0), 2.0);
    // log N(2; 0, 2) = -0.5 (4/2 + log 2 + log 2 pi)
    EXPECT_NEAR(r.log_likelihood, -0.5 * (2.0 + std::log(2.0) + std::log(2.0 * M_PI)), 1e-15);
  }
}

TEST(Update, FeedthroughShiftsInnovation) {
  const auto r = update<1, 1>(scalar(0.0, 1.0), v1(2.0), m1(1.0), v1(0.5), m1(1.0));
  EXPECT_DOUBLE_EQ(r.innovation(0), 1.5);
}

TEST(Update, ZeroObservationLeavesPrediction) {
  std::mt19937 rng(3);
  Gaussian<5> g;
  g.mean << 1, -2, 3, 0.5, 7;
  g.cov = random_spd<5>(rng, 0.1);
  const auto r = update<5, 3>(g, Vec<3>(1, 2, 3), Mat<3, 5>::Zero(), Vec<3>::Zero(), Mat<3, 3>::Identity());
  EXPECT_LT((r.posterior.mean - g.mean).norm(), 1e-15);
  EXPECT_LT((r.posterior.cov - g.cov).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Update, JosephAndStandardAgreeWithOptimalGain) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Gaussian<6> g;
    g.cov = random_spd<6>(rng, 0.5);
    Mat<4, 6> c;
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 6; ++j) c(i, j) = n(rng);
    const Mat<4, 4> r = random_spd<4>(rng, 0.5);
    const Vec<4> y = Vec<4>::Random();
    const auto a = update<6, 4>(g, y, c, Vec<4>::Zero(), r, CovarianceForm::Joseph);
    const auto b = update<6, 4>(g, y, c, Vec<4>::Zero(), r, CovarianceForm::Standard);
    EXPECT_LT((a.posterior.cov - b.posterior.cov).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((a.posterior.mean - b.posterior.mean).norm(), 1e-12);
    EXPECT_EQ(a.posterior.cov, a.posterior.cov.transpose());
    // Information form: P+^-1 = P^-1 + C^T R^-1 C.
    const Mat<6, 6> info = g.cov.inverse() + c.transpose() * r.inverse() * c;
    EXPECT_LT((a.posterior.cov * info - Mat<6, 6>::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Update, LogLikelihoodMatchesDirectDensity) {
  std::mt19937 rng(5);
  Gaussian<3> g;
  g.cov = random_spd<3>(rng, 0.5);
  const Mat<2, 3> c = Mat<2, 3>::Random();
  const Mat<2, 2> r = random_spd<2>(rng, 0.5);
  const Vec<2> y(0.3, -0.8);
  const auto res = update<3, 2>(g, y, c, Vec<2>::Zero(), r);
  const Mat<2, 2> s = c * g.cov * c.transpose() + r;
  const double direct = -0.5 * y.dot(s.inverse() * y) - 0.5 * std::log(s.determinant()) - std::log(2.0 * M_PI);
  EXPECT_NEAR(res.log_likelihood, direct, 1e-12);
}

TEST(Update, SingularInnovationThrows) {
  EXPECT_THROW((update<1, 1>(scalar(0.0, 0.0), v1(1.0), m1(1.0), v1(0.0), m1(0.0))), SingularInnovation);
  EXPECT_THROW((update<1, 1>(scalar(0.0, 1.0), v1(1.0), m1(1.0), v1(0.0), m1(-5.0))), SingularInnovation);
}

TEST(Riccati, ScalarSteadyStateMatchesClosedForm) {
  // x+ = x + w, y = x + v with q = 0.1, r = 1. The steady predicted variance p
  // solves p^2 / (p + r) = q, i.e. p = (q + sqrt(q^2 + 4 q r)) / 2.
  const double q = 0.1, r = 1.0;
  const double p_pred = 0.5 * (q + std::sqrt(q * q + 4.0 * q * r));
  G1 g = scalar(0.0, 5.0);
  double last_pred = 0.0;
  for (int k = 0; k < 200; ++k) {
    const G1 pred = predict<1>(g, m1(1.0), v1(0.0), m1(q));
    last_pred = pred.cov(0, 0);
    g = update<1, 1>(pred, v1(0.0), m1(1.0), v1(0.0), m1(r)).posterior;
  }
  EXPECT_NEAR(last_pred, p_pred, 1e-6);
  EXPECT_NEAR(g.cov(0, 0), p_pred * r / (p_pred + r), 1e-6);
}

TEST(Properties, PosteriorCovarianceStaysSymmetricPsd) {
  std::mt19937 rng(6);
  Gaussian<6> g;
  g.cov = random_spd<6>(rng, 0.1);
  const Mat<6, 6> ad = Mat<6, 6>::Identity() + 0.01 * Mat<6, 6>::Random();
  const Mat<6, 6> q = 1e-4 * Mat<6, 6>::Identity();
  const Mat<3, 6> c = Mat<3, 6>::Random();
  const Mat<3, 3> r = 1e-6 * Mat<3, 3>::Identity();
  for (int k = 0; k < 500; ++k) {
    g = update<6, 3>(predict<6>(g, ad, Vec<6>::Zero(), q), Vec<3>::Random(), c, Vec<3>::Zero(), r).posterior;
    ASSERT_EQ(g.cov, g.cov.transpose());
    ASSERT_GE((Eigen::SelfAdjointEigenSolver<Mat<6, 6>>(g.cov)).eigenvalues().minCoeff(), -1e-10);
  }
}
