#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "contact_imm/types.hpp"

namespace contact_imm {

template <int N>
struct Gaussian {
  Vec<N> mean = Vec<N>::Zero();
  Mat<N, N> cov = Mat<N, N>::Identity();
};

template <int N, int M>
struct UpdateResult {
  Gaussian<N> posterior;
  Vec<M> innovation;
  Mat<M, M> innovation_cov;
  /// log N(innovation; 0, innovation_cov), from the same Cholesky factor.
  double log_likelihood = 0.0;
};

enum class CovarianceForm { Joseph, Standard };

template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& p) {
  p = (0.5 * (p + p.transpose())).eval();
}

template <int N>
Gaussian<N> predict(const Gaussian<N>& prior, const Mat<N, N>& ad, const Vec<N>& bd, const Mat<N, N>& q) {
  Gaussian<N> out;
  out.mean = ad * prior.mean + bd;
  out.cov = ad * prior.cov * ad.transpose() + q;
  symmetrize(out.cov);
  if (!out.mean.allFinite() || !out.cov.allFinite()) throw NonFiniteState("prediction produced non-finite values");
  return out;
}

/// Measurement update for y = C x + feedthrough + v, v ~ N(0, R).
template <int N, int M>
UpdateResult<N, M> update(const Gaussian<N>& pred, const Vec<M>& y, const Mat<M, N>& c,
                          const Vec<M>& feedthrough, const Mat<M, M>& r,
                          CovarianceForm form = CovarianceForm::Joseph) {
  UpdateResult<N, M> out;
  out.innovation = y - c * pred.mean - feedthrough;
  const Mat<N, M> pct = pred.cov * c.transpose();
  out.innovation_cov = c * pct + r;
  symmetrize(out.innovation_cov);

  const Eigen::LLT<Mat<M, M>> llt(out.innovation_cov);
  if (!out.innovation_cov.allFinite() || llt.info() != Eigen::Success) {
    throw SingularInnovation("innovation covariance is not positive definite");
  }
  const Mat<N, M> gain = llt.solve(pct.transpose()).transpose();

  out.posterior.mean = pred.mean + gain * out.innovation;
  const Mat<N, N> ikc = Mat<N, N>::Identity() - gain * c;
  if (form == CovarianceForm::Joseph) {
    out.posterior.cov = ikc * pred.cov * ikc.transpose() + gain * r * gain.transpose();
  } else {
    out.posterior.cov = ikc * pred.cov;
  }
  symmetrize(out.posterior.cov);

  const Vec<M> whitened = llt.matrixL().solve(out.innovation);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.log_likelihood =
      -0.5 * (whitened.squaredNorm() + log_det + static_cast<double>(M) * std::log(2.0 * std::numbers::pi));
  if (!out.posterior.mean.allFinite() || !out.posterior.cov.allFinite()) {
    throw NonFiniteState("update produced non-finite values");
  }
  return out;
}

}  // namespace contact_imm
