#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "contact_imm/dynamics.hpp"
#include "contact_imm/kalman.hpp"
#include "contact_imm/types.hpp"

namespace contact_imm {

/// Row-stochastic Markov matrix, pi(i, j) = Pr(m_{t+1} = j | m_t = i).
class TransitionMatrix {
 public:
  TransitionMatrix() = default;

  explicit TransitionMatrix(Eigen::MatrixXd pi) : pi_(std::move(pi)) {
    if (pi_.rows() == 0 || pi_.rows() != pi_.cols()) throw InvalidProbability("transition matrix must be square");
    if (!pi_.allFinite() || (pi_.array() < 0.0).any()) {
      throw InvalidProbability("transition probabilities must be finite and non-negative");
    }
    for (Eigen::Index i = 0; i < pi_.rows(); ++i) {
      if (std::abs(pi_.row(i).sum() - 1.0) > 1e-12) {
        throw InvalidProbability("transition matrix row " + std::to_string(i) + " does not sum to 1");
      }
    }
  }

  /// The trot-tuned 8x8 matrix over ModeSet::standard().
  static TransitionMatrix trot(double pi0 = 0.8, double pi1 = 0.8, double pi2 = 0.8, double pi3 = 0.8) {
    for (double p : {pi0, pi1, pi2, pi3}) {
      if (!(p > 0.0 && p < 1.0)) throw InvalidProbability("stay probabilities must lie in (0, 1)");
    }
    const double a = (1.0 - pi0) / 2.0;
    const double b = (1.0 - pi1) / 5.0;
    const double c = (1.0 - pi2) / 2.0;
    const double d = (1.0 - pi3) / 2.0;
    Eigen::MatrixXd m(8, 8);
    // clang-format off
    m << pi0, a,   0.0, a,   0.0, 0.0, 0.0, 0.0,
         b,   pi1, b,   b,   0.0, 0.0, b,   b,
         0.0, c,   pi2, 0.0, 0.0, 0.0, 0.0, c,
         b,   b,   0.0, pi1, b,   b,   0.0, b,
         0.0, 0.0, 0.0, c,   pi2, 0.0, 0.0, c,
         0.0, 0.0, 0.0, c,   0.0, pi2, 0.0, c,
         0.0, c,   0.0, 0.0, 0.0, 0.0, pi2, c,
         0.0, d,   0.0, d,   0.0, 0.0, 0.0, pi3;
    // clang-format on
    // Rows are exact in real arithmetic; renormalize away the rounding.
    for (Eigen::Index i = 0; i < 8; ++i) m.row(i) /= m.row(i).sum();
    return TransitionMatrix(m);
  }

  /// Stay with probability `stay`, otherwise jump uniformly to another mode.
  static TransitionMatrix sticky(int modes, double stay) {
    if (modes < 1) throw InvalidProbability("need at least one mode");
    if (modes == 1) return TransitionMatrix(Eigen::MatrixXd::Ones(1, 1));
    if (!(stay > 0.0 && stay < 1.0)) throw InvalidProbability("stay probability must lie in (0, 1)");
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(modes, modes, (1.0 - stay) / (modes - 1));
    m.diagonal().setConstant(stay);
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) /= m.row(i).sum();
    return TransitionMatrix(m);
  }

  [[nodiscard]] int size() const { return static_cast<int>(pi_.rows()); }
  [[nodiscard]] double operator()(int i, int j) const { return pi_(i, j); }
  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return pi_; }

 private:
  Eigen::MatrixXd pi_;
};

/// Physics-based likelihood biasing parameters.
struct BiasConfig {
  double c_force = 1e-3;  // 1/N^2
  double friction_nu = 0.6;  // stored, not used by the bias term
  bool enabled = true;
};

template <int N>
struct ImmBank {
  std::vector<Gaussian<N>> filters;
  Eigen::VectorXd mu;
  Gaussian<N> combined;

  [[nodiscard]] int size() const { return static_cast<int>(filters.size()); }
};

inline constexpr double kDegenerateThreshold = 1e-12;
inline constexpr double kProbabilityFloor = 1e-12;

template <int N>
struct MixResult {
  Eigen::VectorXd c;
  std::vector<Gaussian<N>> mixed;
  std::vector<bool> reinitialized;
};

/// Interaction step. Modes whose predicted probability c(k) falls below
/// 1e-12 restart from the bank's combined estimate.
template <int N>
MixResult<N> interact(const ImmBank<N>& bank, const TransitionMatrix& pi) {
  const int m = bank.size();
  if (m == 0 || pi.size() != m || bank.mu.size() != m) {
    throw DegenerateBank("bank size does not match transition matrix");
  }
  MixResult<N> out;
  out.c = pi.matrix().transpose() * bank.mu;
  out.mixed.resize(static_cast<size_t>(m));
  out.reinitialized.assign(static_cast<size_t>(m), false);
  if ((out.c.array() < kDegenerateThreshold).all()) throw DegenerateBank("all predicted mode probabilities vanished");

  for (int k = 0; k < m; ++k) {
    auto& mixed = out.mixed[static_cast<size_t>(k)];
    if (out.c(k) < kDegenerateThreshold) {
      mixed = bank.combined;
      out.reinitialized[static_cast<size_t>(k)] = true;
      continue;
    }
    mixed.mean.setZero();
    for (int j = 0; j < m; ++j) {
      const double w = pi(j, k) * bank.mu(j) / out.c(k);
      mixed.mean += w * bank.filters[static_cast<size_t>(j)].mean;
    }
    mixed.cov.setZero();
    for (int j = 0; j < m; ++j) {
      const double w = pi(j, k) * bank.mu(j) / out.c(k);
      if (w == 0.0) continue;
      const Vec<N> diff = mixed.mean - bank.filters[static_cast<size_t>(j)].mean;
      mixed.cov += w * (bank.filters[static_cast<size_t>(j)].cov + diff * diff.transpose());
    }
    symmetrize(mixed.cov);
  }
  return out;
}

/// h_f = c_force * sum_i delta_i (min(0, f_z,i^wf))^2.
inline double force_bias(const ContactMode& mode, const PerLeg<Vec3>& forces_wf, const BiasConfig& cfg) {
  if (!cfg.enabled) return 0.0;
  double h = 0.0;
  for (Leg leg : kLegs) {
    if (!mode.contact(leg)) continue;
    const double fz = std::min(0.0, forces_wf[static_cast<size_t>(index_of(leg))].z());
    h += fz * fz;
  }
  return cfg.c_force * h;
}

template <int M>
double gaussian_log_density(const Vec<M>& innovation, const Mat<M, M>& s) {
  const Eigen::LLT<Mat<M, M>> llt(s);
  if (!s.allFinite() || llt.info() != Eigen::Success) {
    throw SingularInnovation("innovation covariance is not positive definite");
  }
  const Vec<M> whitened = llt.matrixL().solve(innovation);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (whitened.squaredNorm() + log_det + static_cast<double>(M) * std::log(2.0 * std::numbers::pi));
}

/// log L(k) = log N(innovation; 0, S) - h_f.
template <int M>
double mode_log_likelihood(const Vec<M>& innovation, const Mat<M, M>& s, const ContactMode& mode,
                           const PerLeg<Vec3>& forces_wf, const BiasConfig& cfg) {
  return gaussian_log_density<M>(innovation, s) - force_bias(mode, forces_wf, cfg);
}

template <int M>
double mode_likelihood(const Vec<M>& innovation, const Mat<M, M>& s, const ContactMode& mode,
                       const PerLeg<Vec3>& forces_wf, const BiasConfig& cfg) {
  return std::exp(mode_log_likelihood<M>(innovation, s, mode, forces_wf, cfg));
}

/// mu(k) proportional to c(k) L(k), evaluated in log space, then floored at
/// 1e-12 and renormalized.
inline Eigen::VectorXd update_probabilities_log(const Eigen::VectorXd& c, const Eigen::VectorXd& log_likelihoods) {
  if (c.size() != log_likelihoods.size()) throw DegenerateBank("likelihood count does not match bank size");
  Eigen::VectorXd log_w(c.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    log_w(k) = (c(k) > 0.0) ? std::log(c(k)) + log_likelihoods(k) : -std::numeric_limits<double>::infinity();
    if (std::isnan(log_w(k))) throw DegenerateBank("NaN mode likelihood");
    max_log = std::max(max_log, log_w(k));
  }
  if (!std::isfinite(max_log)) throw DegenerateBank("all mode likelihoods vanished");

  Eigen::VectorXd mu = (log_w.array() - max_log).exp().matrix();
  mu /= mu.sum();
  mu = mu.cwiseMax(kProbabilityFloor);
  mu /= mu.sum();
  return mu;
}

inline Eigen::VectorXd update_probabilities(const Eigen::VectorXd& c, const Eigen::VectorXd& likelihoods) {
  if ((likelihoods.array() < 0.0).any()) throw InvalidProbability("likelihoods must be non-negative");
  return update_probabilities_log(c, likelihoods.array().log().matrix());
}

/// Moment-matched mixture of the per-mode posteriors.
template <int N>
Gaussian<N> combine(const std::vector<Gaussian<N>>& filters, const Eigen::VectorXd& mu) {
  Gaussian<N> out;
  out.mean.setZero();
  for (size_t k = 0; k < filters.size(); ++k) out.mean += mu(static_cast<Eigen::Index>(k)) * filters[k].mean;
  out.cov.setZero();
  for (size_t k = 0; k < filters.size(); ++k) {
    const Vec<N> diff = out.mean - filters[k].mean;
    out.cov += mu(static_cast<Eigen::Index>(k)) * (filters[k].cov + diff * diff.transpose());
  }
  symmetrize(out.cov);
  return out;
}

template <int N>
Gaussian<N> combine(const ImmBank<N>& bank) {
  return combine(bank.filters, bank.mu);
}

/// p_i = sum_k mu(k) delta_i(k).
inline Vec4 contact_probabilities(const Eigen::VectorXd& mu, const ModeSet& modes) {
  Vec4 p = Vec4::Zero();
  for (const auto& mode : modes.modes()) {
    for (Leg leg : kLegs) {
      if (mode.contact(leg)) p(index_of(leg)) += mu(mode.index);
    }
  }
  return p.cwiseMin(1.0).cwiseMax(0.0);
}

/// One mode's linear-Gaussian model for a single recursion.
template <int N, int M>
struct ModeModel {
  Mat<N, N> ad;
  Vec<N> bd;
  Mat<N, N> q;
  Mat<M, N> c;
  Vec<M> feedthrough;
  Mat<M, M> r;
  double log_bias = 0.0;  // added to the Gaussian log-likelihood (-h_f)
};

template <int N, int M>
struct ImmStepResult {
  ImmBank<N> bank;
  Eigen::VectorXd c;
  Eigen::VectorXd log_likelihoods;
  std::vector<UpdateResult<N, M>> updates;
};

/// Interaction, per-mode filtering, probability update and combination.
template <int N, int M>
ImmStepResult<N, M> imm_step(const ImmBank<N>& bank, const TransitionMatrix& pi,
                             std::span<const ModeModel<N, M>> models, const Vec<M>& y,
                             CovarianceForm form = CovarianceForm::Joseph) {
  if (static_cast<int>(models.size()) != bank.size()) throw DegenerateBank("one model per mode is required");
  const MixResult<N> mix = interact(bank, pi);

  ImmStepResult<N, M> out;
  out.c = mix.c;
  out.log_likelihoods.resize(bank.size());
  out.bank.filters.resize(static_cast<size_t>(bank.size()));
  out.updates.reserve(static_cast<size_t>(bank.size()));
  for (int k = 0; k < bank.size(); ++k) {
    const auto& model = models[static_cast<size_t>(k)];
    const Gaussian<N> pred = predict<N>(mix.mixed[static_cast<size_t>(k)], model.ad, model.bd, model.q);
    out.updates.push_back(update<N, M>(pred, y, model.c, model.feedthrough, model.r, form));
    out.bank.filters[static_cast<size_t>(k)] = out.updates.back().posterior;
    out.log_likelihoods(k) = out.updates.back().log_likelihood + model.log_bias;
  }
  out.bank.mu = update_probabilities_log(mix.c, out.log_likelihoods);
  out.bank.combined = combine(out.bank);
  return out;
}

}  // namespace contact_imm
