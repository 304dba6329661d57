#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "contact_imm/dynamics.hpp"
#include "contact_imm/measurements.hpp"
#include "contact_imm/model.hpp"
#include "contact_imm/rotation.hpp"
#include "contact_imm/types.hpp"

namespace contact_imm {

enum class GaitType { Stand, Trot, Walk };

inline GaitType parse_gait(const std::string& name) {
  if (name == "stand") return GaitType::Stand;
  if (name == "trot") return GaitType::Trot;
  if (name == "walk") return GaitType::Walk;
  throw ConfigError("unknown gait '" + name + "' (expected stand, trot or walk)");
}

/// The touchdown of `leg` nominally scheduled at the first touchdown at or
/// after `time` happens `advance` seconds early.
struct EarlyContact {
  Leg leg = Leg::FL;
  double time = 0.0;
  double advance = 0.02;
};

/// Periodic gait. Leg i is in nominal stance during
/// [(c + offset_i) T, (c + offset_i + duty) T) for every integer cycle c.
class GaitSchedule {
 public:
  GaitType type = GaitType::Trot;
  double period = 0.4;
  double duty = 0.5;
  std::vector<EarlyContact> early_contacts;
  /// The commanded schedule lags the true touchdowns by this much.
  double schedule_offset = 0.0;

  void validate() const {
    if (!(period > 0.0)) throw ConfigError("gait period must be positive");
    if (!(duty > 0.0 && duty <= 1.0)) throw ConfigError("duty factor must lie in (0, 1]");
    for (const auto& e : early_contacts) {
      if (!(e.advance >= 0.0) || e.advance >= (1.0 - duty) * period) {
        throw ConfigError("early contact advance must be non-negative and shorter than the swing");
      }
    }
  }

  [[nodiscard]] double phase_offset(Leg leg) const {
    switch (type) {
      case GaitType::Stand: return 0.0;
      case GaitType::Trot: return (leg == Leg::FR || leg == Leg::RL) ? 0.0 : 0.5;
      case GaitType::Walk:
        switch (leg) {
          case Leg::FL: return 0.0;
          case Leg::RR: return 0.25;
          case Leg::FR: return 0.5;
          case Leg::RL: return 0.75;
        }
    }
    return 0.0;
  }

  [[nodiscard]] bool always_stance() const { return type == GaitType::Stand || duty >= 1.0; }

  /// Cycle index and phase in [0, 1) of `leg` at time t.
  [[nodiscard]] std::pair<double, double> cycle_phase(Leg leg, double t) const {
    const double u = t / period - phase_offset(leg);
    const double c = std::floor(u + kEps);
    return {c, std::max(0.0, u - c)};
  }

  [[nodiscard]] bool nominal_contact(Leg leg, double t) const {
    if (always_stance()) return true;
    return cycle_phase(leg, t).second < duty - kEps;
  }

  [[nodiscard]] bool commanded_contact(Leg leg, double t) const { return nominal_contact(leg, t - schedule_offset); }

  [[nodiscard]] PerLeg<bool> commanded(double t) const {
    PerLeg<bool> out{};
    for (Leg leg : kLegs) out[static_cast<size_t>(index_of(leg))] = commanded_contact(leg, t);
    return out;
  }

  /// Nominal touchdown time of the stance that starts in cycle c.
  [[nodiscard]] double touchdown_time(Leg leg, double cycle) const { return (cycle + phase_offset(leg)) * period; }

  /// How early the touchdown nominally at `nominal_td` happens.
  [[nodiscard]] double touchdown_advance(Leg leg, double nominal_td) const {
    double adv = 0.0;
    for (const auto& e : early_contacts) {
      if (e.leg != leg) continue;
      if (first_touchdown_at_or_after(leg, e.time) == nominal_td) adv = std::max(adv, e.advance);
    }
    return adv;
  }

  [[nodiscard]] double first_touchdown_at_or_after(Leg leg, double t) const {
    const double c = std::ceil(t / period - phase_offset(leg) - kEps);
    return touchdown_time(leg, c);
  }

  struct LegPhase {
    bool contact = true;
    double stance_touchdown = 0.0;  // nominal touchdown of the current (or next, while swinging) stance
    double liftoff = 0.0;           // start of the current swing
    double touchdown = 0.0;         // actual end of the current swing
  };

  /// An early touchdown shortens the swing before it; liftoff is unchanged.
  [[nodiscard]] LegPhase phase(Leg leg, double t) const {
    LegPhase out;
    if (always_stance()) return out;
    const auto [c, phi] = cycle_phase(leg, t);
    if (phi < duty - kEps) {
      out.contact = true;
      out.stance_touchdown = touchdown_time(leg, c);
      return out;
    }
    out.stance_touchdown = touchdown_time(leg, c + 1.0);
    out.liftoff = (c + phase_offset(leg) + duty) * period;
    out.touchdown = out.stance_touchdown - touchdown_advance(leg, out.stance_touchdown);
    out.contact = t >= out.touchdown - kEps;
    return out;
  }

  [[nodiscard]] bool true_contact(Leg leg, double t) const { return phase(leg, t).contact; }

  static constexpr double kEps = 1e-9;
};

struct SensorNoise {
  double theta = 0.005;
  double omega = 0.01;
  double accel = 0.05;
  double q = 0.001;
  double q_dot = 0.01;
  double tau = 0.2;

  static SensorNoise none() { return {0, 0, 0, 0, 0, 0}; }
};

/// Trunk PD gains of the simulated stance controller.
struct ControllerGains {
  double kp_lin = 100.0;  // height
  double kd_lin = 20.0;   // height rate and forward speed
  double kd_lat = 5.0;    // lateral speed
  double kp_rot = 300.0;
  double kd_rot = 40.0;
  /// Relative priority of the moment equations in the force distribution.
  double moment_weight = 100.0;
  /// Foothold shift per m/s of velocity error.
  double foot_feedback = 0.15;
  /// Fraction of each swing during which the foothold is re-planned.
  double replan_fraction = 0.5;
};

struct SimConfig {
  double duration = 3.0;
  double rate = 200.0;
  std::uint64_t seed = 1;
  double speed = 1.0;
  double height = 0.30;
  double swing_height = 0.05;
  /// Effective leg mass seen at the foot while swinging; sets the torques
  /// (and hence the hypothetical force) of a leg in the air.
  double swing_leg_mass = 3.0;
  SensorNoise noise;
  /// Standard deviation (N, N m) of an unmodeled random wrench on the trunk.
  double model_mismatch = 0.0;
  bool exact_euler_rates = false;
  ControllerGains gains;

  [[nodiscard]] double ts() const { return 1.0 / rate; }

  [[nodiscard]] std::size_t ticks() const {
    return static_cast<std::size_t>(std::floor(duration * rate + 1e-9));
  }

  void validate() const {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ConfigError("sim rate must be positive");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw ConfigError("sim duration must be non-negative");
    if (!(height > 0.0)) throw ConfigError("nominal height must be positive");
    if (!(swing_height >= 0.0)) throw ConfigError("swing height must be non-negative");
    if (!(swing_leg_mass >= 0.0)) throw ConfigError("swing leg mass must be non-negative");
    if (!(model_mismatch >= 0.0)) throw ConfigError("model mismatch must be non-negative");
  }
};

struct SimTrace {
  double ts = 0.005;
  std::vector<double> t;
  std::vector<StateVec> truth;
  std::vector<PerLeg<bool>> contacts;
  std::vector<PerLeg<Vec3>> forces;  // true contact forces, body frame
  std::vector<SensorSample> sensors;
  /// Centroid (x, y) of the feet in contact: the origin of the horizontal
  /// position observed through the leg kinematics.
  std::vector<Eigen::Vector2d> anchor;

  [[nodiscard]] std::size_t size() const { return t.size(); }
};

/// Distributes the wrench needed for `desired_accel` = [angular accel (world);
/// linear accel (world)] over the contact feet by weighted least squares
/// (moments and vertical force weighted by `moment_weight`), then projects
/// each force onto f_z^wf >= 0. Returns body-frame forces.
inline PerLeg<Vec3> synthesize_stance_forces(const TrunkState& state, const PerLeg<bool>& contacts,
                                             const FootPositions& feet_bf, const RobotParams& params,
                                             const Vec<6>& desired_accel, double moment_weight = 100.0) {
  PerLeg<Vec3> out{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::vector<int> stance;
  for (int i = 0; i < kNumLegs; ++i) {
    if (contacts[static_cast<size_t>(i)]) stance.push_back(i);
  }
  if (stance.empty()) return out;

  const Mat3 r = rotation_bf_to_wf(state.theta);
  Vec<6> wrench;
  wrench.head<3>() = params.inertia * (r.transpose() * desired_accel.head<3>());
  wrench.tail<3>() = r.transpose() * (params.mass * (desired_accel.tail<3>() - params.gravity));

  const auto n = static_cast<Eigen::Index>(3 * stance.size());
  Eigen::MatrixXd g(6, n);
  for (size_t s = 0; s < stance.size(); ++s) {
    const auto col = static_cast<Eigen::Index>(3 * s);
    g.block<3, 3>(0, col) = moment_weight * skew(feet_bf[static_cast<size_t>(stance[s])]);
    g.block<3, 3>(3, col) = Mat3::Identity();
  }
  // Vertical force shares the moment priority: a two-leg stance cannot
  // realize every wrench, and horizontal force is the component to give up.
  g.row(5) *= moment_weight;
  Vec<6> rhs = wrench;
  rhs.head<3>() *= moment_weight;
  rhs(5) *= moment_weight;
  const Eigen::VectorXd f = g.completeOrthogonalDecomposition().solve(rhs);

  for (size_t s = 0; s < stance.size(); ++s) {
    Vec3 fw = r * f.segment<3>(static_cast<Eigen::Index>(3 * s));
    fw.z() = std::max(0.0, fw.z());
    out[static_cast<size_t>(stance[s])] = r.transpose() * fw;
  }
  return out;
}

struct TruthOptions {
  bool exact_euler_rates = false;
  bool rk4 = true;
};

/// Time derivative of the trunk state under the switched model.
inline StateVec truth_derivative(const StateVec& x, const PerLeg<Vec3>& forces_bf, const PerLeg<bool>& contacts,
                                 const FootPositions& feet_bf, const RobotParams& params, bool exact_euler_rates,
                                 const Vec<6>& extra_wrench_wf = Vec<6>::Zero()) {
  const Vec3 theta = x.segment<3>(kThetaIdx);
  const ContactMode mode{contacts, -1};
  ForceEstimate f;
  f.force = forces_bf;
  StateVec dx = build_A(theta) * x + gravity_input(params.gravity) + build_B(theta, feet_bf, mode, params) * f.stacked();
  if (exact_euler_rates) {
    dx.segment<3>(kThetaIdx) = euler_rate_matrix(theta).partialPivLu().solve(Vec3(x.segment<3>(kOmegaIdx)));
  }
  if (!extra_wrench_wf.isZero(0.0)) {
    const Mat3 r = rotation_bf_to_wf(theta);
    dx.segment<3>(kOmegaIdx) += r * params.inertia.inverse() * r.transpose() * extra_wrench_wf.head<3>();
    dx.segment<3>(kVelIdx) += extra_wrench_wf.tail<3>() / params.mass;
  }
  return dx;
}

/// Advances the true trunk state by one tick with forces held constant.
inline TrunkState step_truth(const TrunkState& state, const PerLeg<Vec3>& forces_bf, const PerLeg<bool>& contacts,
                             const FootPositions& feet_bf, const RobotParams& params, double ts,
                             const TruthOptions& opts = {}, const Vec<6>& extra_wrench_wf = Vec<6>::Zero()) {
  if (!(ts > 0.0)) throw ConfigError("sampling period must be positive");
  const StateVec x = state.stacked();
  auto f = [&](const StateVec& s) {
    return truth_derivative(s, forces_bf, contacts, feet_bf, params, opts.exact_euler_rates, extra_wrench_wf);
  };
  StateVec next;
  if (opts.rk4) {
    const StateVec k1 = f(x);
    const StateVec k2 = f(x + 0.5 * ts * k1);
    const StateVec k3 = f(x + 0.5 * ts * k2);
    const StateVec k4 = f(x + ts * k3);
    next = x + (ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  } else {
    next = x + ts * f(x);
  }
  if (!next.allFinite()) throw NonFiniteState("truth integration produced non-finite values");
  return TrunkState::from(next);
}

/// Gaussian sensor noise drawn in a fixed channel order.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : rng_(seed) {}

  double operator()(double std_dev) {
    const double n = normal_(rng_);
    return std_dev * n;
  }
  Vec3 vec3(double std_dev) {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v(i) = (*this)(std_dev);
    return v;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Sensor channels for one tick. `legs` holds the true joint states with
/// torques already set; `extra_force_wf` is the unmodeled force felt by the IMU.
inline SensorSample synthesize_sensors(double t, const TrunkState& state, const PerLeg<Vec3>& forces_bf,
                                       const PerLeg<bool>& contacts, const PerLeg<LegState>& legs,
                                       const RobotParams& params, const SensorNoise& noise, NoiseSource& rng,
                                       const Vec3& extra_force_wf = Vec3::Zero()) {
  const Mat3 r_wb = rotation_wf_to_bf(state.theta);
  SensorSample s;
  s.t = t;
  s.theta = state.theta + rng.vec3(noise.theta);
  s.omega = r_wb * state.omega + rng.vec3(noise.omega);
  Vec3 accel = r_wb * extra_force_wf / params.mass;
  for (int i = 0; i < kNumLegs; ++i) {
    if (contacts[static_cast<size_t>(i)]) accel += forces_bf[static_cast<size_t>(i)] / params.mass;
  }
  s.accel = accel + rng.vec3(noise.accel);
  for (int i = 0; i < kNumLegs; ++i) {
    const auto& l = legs[static_cast<size_t>(i)];
    auto& out = s.legs[static_cast<size_t>(i)];
    out.q = l.q + rng.vec3(noise.q);
    out.q_dot = l.q_dot + rng.vec3(noise.q_dot);
    out.tau = l.tau + rng.vec3(noise.tau);
  }
  return s;
}

namespace detail {

struct FootMotion {
  Vec3 pos;
  Vec3 vel;
  Vec3 acc;
};

/// Where a foot rests under a hip at nominal height, world frame.
inline Vec3 neutral_foothold(const RobotParams& params, Leg leg, const Vec3& com, double yaw) {
  const Vec3 hip = params.hip_offset(leg) + Vec3(0.0, RobotParams::side(leg) * params.l_hip, 0.0);
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {com.x() + c * hip.x() - s * hip.y(), com.y() + s * hip.x() + c * hip.y(), 0.0};
}

/// One swing from `start` to `end`, lifting by `height` at mid-swing.
struct SwingPlan {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  double liftoff = 0.0;
  double touchdown = 0.0;
  double stance_touchdown = -1.0;  // identifies the stance this swing leads into
};

inline FootMotion swing_motion(const SwingPlan& plan, double height, double t) {
  const double tsw = plan.touchdown - plan.liftoff;
  const double s = std::clamp((t - plan.liftoff) / tsw, 0.0, 1.0);
  const double w = M_PI / tsw;
  const Vec3 delta = plan.end - plan.start;
  FootMotion m;
  m.pos = plan.start + delta * (0.5 * (1.0 - std::cos(M_PI * s)));
  m.vel = delta * (0.5 * w * std::sin(M_PI * s));
  m.acc = delta * (0.5 * w * w * std::cos(M_PI * s));
  m.pos.z() += height * std::sin(M_PI * s);
  m.vel.z() += height * w * std::cos(M_PI * s);
  m.acc.z() += -height * w * w * std::sin(M_PI * s);
  return m;
}

}  // namespace detail

/// Generates a deterministic ground-truth trace: the trunk follows the
/// switched model driven by a PD stance controller, stance feet stay pinned
/// in the world, swing feet follow a half-sine lift towards a foothold chosen
/// at liftoff from the trunk velocity, and all sensor channels are
/// synthesized from the same state.
inline SimTrace run_scenario(const SimConfig& cfg, const GaitSchedule& gait, const RobotParams& params) {
  cfg.validate();
  gait.validate();
  params.validate();
  if (gait.always_stance() && cfg.speed != 0.0) throw ConfigError("a standing gait requires speed = 0");

  const double ts = cfg.ts();
  const std::size_t n = cfg.ticks();
  SimTrace trace;
  trace.ts = ts;
  trace.t.reserve(n);
  trace.truth.reserve(n);
  trace.contacts.reserve(n);
  trace.forces.reserve(n);
  trace.sensors.reserve(n);
  trace.anchor.reserve(n);

  NoiseSource rng(cfg.seed);
  NoiseSource wrench_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  TrunkState state;
  state.d_com = Vec3(0.0, 0.0, cfg.height);
  state.v_com = Vec3(cfg.speed, 0.0, 0.0);
  Eigen::Vector2d anchor = state.d_com.head<2>();
  const TruthOptions topts{cfg.exact_euler_rates, true};
  const auto& gn = cfg.gains;
  const double stance_time = gait.duty * gait.period;

  // Feet start under the hips, shifted to where the trunk is at mid-stance.
  PerLeg<Vec3> rest{};
  PerLeg<detail::SwingPlan> plans{};
  for (Leg leg : kLegs) {
    const auto i = static_cast<size_t>(index_of(leg));
    const auto ph = gait.phase(leg, 0.0);
    const double mid = gait.always_stance() ? 0.0 : (ph.contact ? ph.stance_touchdown : ph.stance_touchdown - gait.period) + 0.5 * stance_time;
    rest[i] = detail::neutral_foothold(params, leg, Vec3(cfg.speed * mid, 0.0, 0.0), 0.0);
  }

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * ts;
    const Mat3 r = rotation_bf_to_wf(state.theta);
    const Vec3 theta_dot = cfg.exact_euler_rates
                               ? Vec3(euler_rate_matrix(state.theta).partialPivLu().solve(state.omega))
                               : Vec3(r.transpose() * state.omega);
    const double h = 1e-6;
    const Mat3 r_dot =
        (rotation_bf_to_wf(state.theta + h * theta_dot) - rotation_bf_to_wf(state.theta - h * theta_dot)) / (2.0 * h);

    PerLeg<bool> contacts{};
    PerLeg<LegState> legs{};
    FootPositions feet_bf{};
    PerLeg<Vec3> swing_force_bf{};
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    int n_contact = 0;
    for (Leg leg : kLegs) {
      const auto i = static_cast<size_t>(index_of(leg));
      const auto ph = gait.phase(leg, t);
      auto& plan = plans[i];
      detail::FootMotion motion{rest[i], Vec3::Zero(), Vec3::Zero()};
      if (!ph.contact) {
        const bool new_swing = plan.stance_touchdown != ph.stance_touchdown;
        if (new_swing || t < plan.liftoff + gn.replan_fraction * (plan.touchdown - plan.liftoff)) {
          // Capture-point style placement: neutral point at touchdown plus
          // half a stance of travel plus velocity-error feedback.
          const double to_go = std::max(0.0, ph.stance_touchdown - t);
          Vec3 v = state.v_com;
          v.z() = 0.0;
          const Vec3 com_td = state.d_com + v * to_go;
          const Vec3 v_err = v - Vec3(cfg.speed, 0.0, 0.0);
          if (new_swing) plan.start = rest[i];
          plan.end = detail::neutral_foothold(params, leg, com_td + v * (0.5 * stance_time) + gn.foot_feedback * v_err,
                                              state.theta.z());
          plan.end.z() = 0.0;
          plan.liftoff = ph.liftoff;
          plan.touchdown = ph.touchdown;
          plan.stance_touchdown = ph.stance_touchdown;
        }
        motion = detail::swing_motion(plan, cfg.swing_height, t);
      } else if (plan.stance_touchdown == ph.stance_touchdown) {
        rest[i] = plan.end;
        motion.pos = rest[i];
      }
      contacts[i] = ph.contact;
      const Vec3 rel = motion.pos - state.d_com;
      feet_bf[i] = r.transpose() * rel;
      const auto q = inverse_kinematics(params, leg, feet_bf[i]);
      if (!q) {
        throw Error("foot target of leg " + std::string(leg_name(leg)) + " is out of reach at t=" + std::to_string(t));
      }
      legs[i].q = *q;
      const Vec3 foot_vel_bf = r_dot.transpose() * rel + r.transpose() * (motion.vel - state.v_com);
      legs[i].q_dot = jacobian(params, leg, *q).partialPivLu().solve(foot_vel_bf);
      swing_force_bf[i] = r.transpose() * (-cfg.swing_leg_mass * (motion.acc - params.gravity));
      if (contacts[i]) {
        centroid += motion.pos.head<2>();
        ++n_contact;
      }
    }
    if (n_contact > 0) anchor = centroid / n_contact;

    Vec<6> desired;
    desired.head<3>() = -gn.kp_rot * state.theta - gn.kd_rot * state.omega;
    desired.tail<3>() = Vec3(0.0, -gn.kd_lat * state.v_com.y(), 0.0);
    desired(5) = gn.kp_lin * (cfg.height - state.d_com.z()) - gn.kd_lin * state.v_com.z();
    desired(3) = gn.kd_lin * (cfg.speed - state.v_com.x());
    const PerLeg<Vec3> forces = synthesize_stance_forces(state, contacts, feet_bf, params, desired, gn.moment_weight);

    for (Leg leg : kLegs) {
      const auto i = static_cast<size_t>(index_of(leg));
      const Vec3 f = contacts[i] ? forces[i] : swing_force_bf[i];
      legs[i].tau = torques_for_force(params, leg, legs[i].q, f);
    }

    Vec<6> extra = Vec<6>::Zero();
    if (cfg.model_mismatch > 0.0) {
      extra.head<3>() = wrench_rng.vec3(cfg.model_mismatch);
      extra.tail<3>() = wrench_rng.vec3(cfg.model_mismatch);
    }

    trace.t.push_back(t);
    trace.truth.push_back(state.stacked());
    trace.contacts.push_back(contacts);
    trace.forces.push_back(forces);
    trace.anchor.push_back(anchor);
    trace.sensors.push_back(
        synthesize_sensors(t, state, forces, contacts, legs, params, cfg.noise, rng, Vec3(extra.tail<3>())));

    state = step_truth(state, forces, contacts, feet_bf, params, ts, topts, extra);
  }
  return trace;
}

/// Truth expressed in the estimator's frame: horizontal position measured
/// from the contact-foot centroid, everything else unchanged.
inline std::vector<StateVec> estimator_frame_truth(const SimTrace& trace) {
  std::vector<StateVec> out = trace.truth;
  for (std::size_t k = 0; k < out.size(); ++k) out[k].segment<2>(kPosIdx) -= trace.anchor[k];
  return out;
}

}  // namespace contact_imm
