#pragma once

#include <vector>

#include <Eigen/Core>

#include "contact_imm/dynamics.hpp"
#include "contact_imm/imm.hpp"
#include "contact_imm/kalman.hpp"
#include "contact_imm/measurements.hpp"
#include "contact_imm/model.hpp"

namespace contact_imm {

struct FilterOptions {
  CovarianceForm covariance_form = CovarianceForm::Joseph;
  /// Initial covariance is this multiple of Q.
  double initial_cov_scale = 10.0;
};

/// One row of estimator output.
struct EstimateSample {
  double t = 0.0;
  StateVec state = StateVec::Zero();
  StateMat cov = StateMat::Identity();
  Vec4 contact_prob = Vec4::Zero();
  Eigen::VectorXd mode_prob;
};

/// Hypothetical forces for every leg. A leg at a kinematic singularity
/// keeps its previous estimate and is flagged invalid.
inline ForceEstimate estimate_forces(const RobotParams& params, const PerLeg<LegState>& legs,
                                     const ForceEstimate& previous) {
  ForceEstimate out;
  for (Leg leg : kLegs) {
    const auto i = static_cast<size_t>(index_of(leg));
    try {
      out.force[i] = estimate_contact_force(params, leg, legs[i].q, legs[i].tau).force;
      out.valid[i] = true;
    } catch (const SingularJacobian&) {
      out.force[i] = previous.force[i];
      out.valid[i] = false;
    }
  }
  return out;
}

inline FootPositions foot_positions(const RobotParams& params, const PerLeg<LegState>& legs) {
  FootPositions feet;
  for (Leg leg : kLegs) {
    const auto i = static_cast<size_t>(index_of(leg));
    feet[i] = forward_kinematics(params, leg, legs[i].q);
  }
  return feet;
}

inline PerLeg<Vec3> forces_in_world(const ForceEstimate& f, const Vec3& theta) {
  const Mat3 r = rotation_bf_to_wf(theta);
  PerLeg<Vec3> out;
  for (size_t i = 0; i < out.size(); ++i) out[i] = r * f.force[i];
  return out;
}

/// Inputs shared by every mode in one recursion.
struct RecursionInputs {
  Vec3 theta_hat;            // previous combined attitude (linearization point)
  FootPositions feet_prev;   // foot positions over the prediction interval
  ForceEstimate forces_prev; // forces acting over the prediction interval
  ForceEstimate forces_now;  // forces at the measurement instant
  MeasMat r;
  double ts;
};

/// Discrete model of one contact mode.
inline ModeModel<kStateDim, kMeasDim> build_mode_model(const RobotParams& params, const NoiseConfig& noise,
                                                       const ContactMode& mode, const RecursionInputs& in) {
  const DiscreteModel dm = discretize(build_A(in.theta_hat), build_B(in.theta_hat, in.feet_prev, mode, params),
                                      params.gravity, in.ts);
  ModeModel<kStateDim, kMeasDim> m;
  m.ad = dm.Ad;
  m.bd = dm.Bd * in.forces_prev.stacked() + dm.gd;
  m.q = noise.q();
  m.c = build_C(in.theta_hat);
  m.feedthrough = build_D(mode, params.mass) * in.forces_now.stacked();
  m.r = in.r;
  return m;
}

/// Initial Gaussian built from the first measurement bundle.
inline Gaussian<kStateDim> initial_gaussian(const MeasurementBundle& b, const NoiseConfig& noise,
                                            const FilterOptions& opts) {
  Gaussian<kStateDim> g;
  const Vec3 theta = b.raw.theta;
  g.mean << theta, b.y.segment<3>(kMeasPosIdx), rotation_bf_to_wf(theta) * b.raw.omega, b.y.segment<3>(kMeasVelIdx);
  g.cov = opts.initial_cov_scale * noise.q();
  return g;
}

/// Simultaneous contact detection and trunk-state estimation with an
/// interacting multiple-model Kalman filter over contact modes.
class ContactImm {
 public:
  ContactImm(RobotParams params, ModeSet modes, TransitionMatrix pi, NoiseConfig noise, BiasConfig bias,
             double ts, FilterOptions opts = {})
      : params_(std::move(params)),
        modes_(std::move(modes)),
        pi_(std::move(pi)),
        noise_(std::move(noise)),
        bias_(bias),
        ts_(ts),
        opts_(opts) {
    params_.validate();
    noise_.validate();
    if (pi_.size() != modes_.size()) throw ConfigError("transition matrix size does not match the mode set");
    if (!(ts_ > 0.0)) throw ConfigError("sampling period must be positive");
    if (bias_.c_force < 0.0) throw ConfigError("c_force must be non-negative");
  }

  /// Processes one tick of sensor data and returns the combined estimate.
  EstimateSample step(const SensorSample& raw) {
    const Vec3 theta_hat = initialized_ ? Vec3(bank_.combined.mean.segment<3>(kThetaIdx)) : raw.theta;
    if (!initialized_) {
      bank_.mu = Eigen::VectorXd::Constant(modes_.size(), 1.0 / modes_.size());
      p_ = contact_probabilities(bank_.mu, modes_);
    }
    last_bundle_ = assemble(raw, p_, theta_hat, params_, noise_.p_bar, held_);
    const ForceEstimate forces_now = estimate_forces(params_, raw.legs, forces_prev_);
    const FootPositions feet_now = foot_positions(params_, raw.legs);

    if (!initialized_) {
      const Gaussian<kStateDim> g0 = initial_gaussian(last_bundle_, noise_, opts_);
      bank_.filters.assign(static_cast<size_t>(modes_.size()), g0);
      bank_.combined = g0;
      initialized_ = true;
    } else {
      const RecursionInputs in{theta_hat, feet_prev_, forces_prev_, forces_now,
                               build_R(noise_, last_bundle_.r_scale, last_bundle_.pseudo_valid), ts_};
      const PerLeg<Vec3> forces_wf = forces_in_world(forces_now, theta_hat);
      models_.clear();
      for (const auto& mode : modes_.modes()) {
        auto m = build_mode_model(params_, noise_, mode, in);
        m.log_bias = -force_bias(mode, forces_wf, bias_);
        models_.push_back(m);
      }
      auto result = imm_step<kStateDim, kMeasDim>(bank_, pi_, models_, last_bundle_.y, opts_.covariance_form);
      bank_ = std::move(result.bank);
      last_log_likelihoods_ = std::move(result.log_likelihoods);
      p_ = contact_probabilities(bank_.mu, modes_);
    }
    forces_prev_ = forces_now;
    feet_prev_ = feet_now;
    return {raw.t, bank_.combined.mean, bank_.combined.cov, p_, bank_.mu};
  }

  [[nodiscard]] const ImmBank<kStateDim>& bank() const { return bank_; }
  [[nodiscard]] const ModeSet& modes() const { return modes_; }
  [[nodiscard]] const MeasurementBundle& last_bundle() const { return last_bundle_; }
  [[nodiscard]] const Eigen::VectorXd& last_log_likelihoods() const { return last_log_likelihoods_; }
  [[nodiscard]] const Vec4& contact_prob() const { return p_; }

 private:
  RobotParams params_;
  ModeSet modes_;
  TransitionMatrix pi_;
  NoiseConfig noise_;
  BiasConfig bias_;
  double ts_;
  FilterOptions opts_;

  bool initialized_ = false;
  ImmBank<kStateDim> bank_;
  Vec4 p_ = Vec4::Zero();
  HeldPseudo held_;
  ForceEstimate forces_prev_;
  FootPositions feet_prev_{};
  MeasurementBundle last_bundle_;
  Eigen::VectorXd last_log_likelihoods_;
  std::vector<ModeModel<kStateDim, kMeasDim>> models_;
};

/// Baseline: one Kalman filter on the switched model whose mode is taken
/// from the commanded gait schedule instead of being estimated.
class ScheduledModeKf {
 public:
  ScheduledModeKf(RobotParams params, ModeSet modes, NoiseConfig noise, double ts, FilterOptions opts = {})
      : params_(std::move(params)), modes_(std::move(modes)), noise_(std::move(noise)), ts_(ts), opts_(opts) {
    params_.validate();
    noise_.validate();
    if (!(ts_ > 0.0)) throw ConfigError("sampling period must be positive");
  }

  EstimateSample step(const SensorSample& raw, const PerLeg<bool>& commanded) {
    const ContactMode mode{commanded, modes_.find(commanded).value_or(-1)};
    Vec4 p;
    for (int i = 0; i < kNumLegs; ++i) p(i) = commanded[static_cast<size_t>(i)] ? 1.0 : 0.0;

    const Vec3 theta_hat = initialized_ ? Vec3(estimate_.mean.segment<3>(kThetaIdx)) : raw.theta;
    const MeasurementBundle b = assemble(raw, p, theta_hat, params_, noise_.p_bar, held_);
    const ForceEstimate forces_now = estimate_forces(params_, raw.legs, forces_prev_);
    const FootPositions feet_now = foot_positions(params_, raw.legs);

    if (!initialized_) {
      estimate_ = initial_gaussian(b, noise_, opts_);
      initialized_ = true;
    } else {
      const RecursionInputs in{theta_hat, feet_prev_, forces_prev_, forces_now,
                               build_R(noise_, b.r_scale, b.pseudo_valid), ts_};
      const auto m = build_mode_model(params_, noise_, mode, in);
      const Gaussian<kStateDim> pred = predict<kStateDim>(estimate_, m.ad, m.bd, m.q);
      estimate_ = update<kStateDim, kMeasDim>(pred, b.y, m.c, m.feedthrough, m.r, opts_.covariance_form).posterior;
    }
    forces_prev_ = forces_now;
    feet_prev_ = feet_now;

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(modes_.size());
    if (mode.index >= 0) mu(mode.index) = 1.0;
    return {raw.t, estimate_.mean, estimate_.cov, p, mu};
  }

 private:
  RobotParams params_;
  ModeSet modes_;
  NoiseConfig noise_;
  double ts_;
  FilterOptions opts_;

  bool initialized_ = false;
  Gaussian<kStateDim> estimate_;
  HeldPseudo held_;
  ForceEstimate forces_prev_;
  FootPositions feet_prev_{};
};

}  // namespace contact_imm
