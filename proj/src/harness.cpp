#include "abpid/harness.hpp"

#include "abpid/estimator.hpp"
#include "abpid/gainmap.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace abpid {

using quad::Vec3;
using quad::Vec4;

void SensorNoise::validate() const {
  if (position_sigma < 0.0 || attitude_sigma < 0.0 || rate_sigma < 0.0 || feedback_delay < 0 ||
      lowpass_tau < 0.0) {
    throw ConfigurationError("sensor noise: sigmas, delay and filter constant must be >= 0");
  }
}

SensorModel::SensorModel(SensorNoise noise, double dt, std::uint64_t seed)
    : noise_(noise), dt_(dt), rng_(seed) {
  noise_.validate();
}

Measurement SensorModel::measure(const quad::QuadState& truth) {
  const auto noisy = [this](const Vec3& v, double sigma) {
    if (sigma == 0.0) return v;
    return Vec3(v + sigma * Vec3(normal_(rng_), normal_(rng_), normal_(rng_)));
  };
  Measurement m{noisy(truth.xi, noise_.position_sigma), noisy(truth.eta, noise_.attitude_sigma),
                noisy(truth.xi_dot, noise_.rate_sigma), noisy(truth.eta_dot, noise_.rate_sigma)};
  if (noise_.lowpass_tau > 0.0) {
    if (!filtered_) {
      filtered_ = m;
    } else {
      const double a = dt_ / (noise_.lowpass_tau + dt_);
      filtered_->xi += a * (m.xi - filtered_->xi);
      filtered_->eta += a * (m.eta - filtered_->eta);
      filtered_->xi_dot += a * (m.xi_dot - filtered_->xi_dot);
      filtered_->eta_dot += a * (m.eta_dot - filtered_->eta_dot);
    }
    m = *filtered_;
  }
  if (noise_.feedback_delay == 0) return m;
  if (pipeline_.empty()) {
    pipeline_.assign(static_cast<std::size_t>(noise_.feedback_delay), m);
  }
  pipeline_.push_back(m);
  Measurement out = pipeline_.front();
  pipeline_.pop_front();
  return out;
}

LoopGains LoopGains::from_axes(const Vec& k1, const Vec& k2, const Vec& gamma) {
  if (k1.size() != 6 || k2.size() != 6 || gamma.size() != 6) {
    throw ConfigurationError("loop gains: six entries per gain diagonal required");
  }
  return {{k1.head(3), k2.head(3), gamma.head(3)}, {k1.tail(3), k2.tail(3), gamma.tail(3)}};
}

LoopGains LoopGains::baseline() {
  Vec k1(6), k2(6), gamma(6);
  k1 << 1, 1, 2.6, 30, 30, 4;
  k2 << 1, 1, 0.4, 0.3, 0.3, 1;
  gamma << 0.4, 0.4, 0.4, 1, 1, 1;
  return from_axes(k1, k2, gamma);
}

LoopGains LoopGains::fine_tuned() {
  LoopGains g = baseline();
  const auto lateral = backstepping_from_pid(2.4, 4.0, 0.4);
  for (int i = 0; i < 2; ++i) {
    g.outer.k1[i] = lateral.k1;
    g.outer.k2[i] = lateral.k2;
  }
  return g;
}

LoopGains LoopGains::payload_drop() {
  LoopGains g = fine_tuned();
  g.outer.k2[2] = 2.0;
  g.outer.gamma[2] = 2.0;
  return g;
}

BacksteppingGains LoopGains::stacked() const {
  BacksteppingGains s{Vec(6), Vec(6), Vec(6)};
  s.k1 << outer.k1, inner.k1;
  s.k2 << outer.k2, inner.k2;
  s.gamma << outer.gamma, inner.gamma;
  return s;
}

void LoopGains::validate() const {
  if (outer.size() != 3 || inner.size() != 3) {
    throw ConfigurationError("loop gains: each loop needs three axes");
  }
  outer.validate();
  inner.validate();
}

void SimConfig::validate() const {
  if (!(dt_plant > 0.0) || !(dt_control > 0.0) || dt_plant > dt_control) {
    throw ConfigurationError("sim config: need 0 < dt_plant <= dt_control");
  }
  const double ratio = dt_control / dt_plant;
  if (std::abs(ratio - std::round(ratio)) > 1e-6) {
    throw ConfigurationError("sim config: dt_control must be a multiple of dt_plant");
  }
  if (robust_k20.size() != 6) throw ConfigurationError("sim config: robust.k20 needs 6 entries");
  if (!(robust_epsilon > 0.0)) throw ConfigurationError("sim config: robust.epsilon must be > 0");
  if (e1_dot_tau < 0.0 || motor_tau < 0.0 || rls_filter_tau < 0.0 || attitude_ref_tau <= 0.0) {
    throw ConfigurationError("sim config: time constants must be non-negative");
  }
  if (!(rls_lambda > 0.0 && rls_lambda <= 1.0) || !(rls_p0 > 0.0) || !(theta_limit > 0.0)) {
    throw ConfigurationError("sim config: invalid estimator settings");
  }
  if (!(max_tilt > 0.0 && max_tilt < std::numbers::pi / 2.0 - quad::kAttitudeMargin)) {
    throw ConfigurationError("sim config: max_tilt out of range");
  }
  if (d_bar_outer && !(*d_bar_outer >= 0.0)) throw ConfigurationError("sim config: d_bar < 0");
  if (d_bar_inner && !(*d_bar_inner >= 0.0)) throw ConfigurationError("sim config: d_bar < 0");
  vehicle.validate();
}

double default_d_bar_outer(const quad::QuadrotorParams& vehicle, const quad::Payload& payload) {
  const double mp = payload.attached ? payload.mass : 0.0;
  return std::max(1.0, 2.0 * vehicle.gravity * mp / vehicle.mass);
}

double default_d_bar_inner(const quad::QuadrotorParams& vehicle, const quad::Payload& payload) {
  if (!payload.attached) return 1.0;
  const auto laden = quad::composite_inertia(vehicle, payload);
  const double moment = laden.mass * laden.gravity * laden.com_offset.head<2>().norm();
  return std::max(1.0, 2.0 * moment / vehicle.inertia(0, 0));
}

namespace {

/// Critically damped second-order tracking filter giving smooth first and
/// second derivatives of a sampled signal.
class DerivativeFilter {
 public:
  explicit DerivativeFilter(double tau) : wn_(1.0 / tau) {}

  void update(double x, double dt) {
    if (!primed_) {
      y_ = x;
      primed_ = true;
    }
    ydd_ = wn_ * wn_ * (x - y_) - 2.0 * wn_ * yd_;
    yd_ += dt * ydd_;
    y_ += dt * yd_;
  }
  double rate() const { return yd_; }
  double accel() const { return ydd_; }

 private:
  double wn_;
  bool primed_ = false;
  double y_ = 0.0;
  double yd_ = 0.0;
  double ydd_ = 0.0;
};

struct LowPass {
  Mat value;
  bool primed = false;

  const Mat& update(const Mat& x, double alpha) {
    if (!primed) {
      value = x;
      primed = true;
    } else {
      value += alpha * (x - value);
    }
    return value;
  }
};

template <std::size_t N, class V>
void copy_to(std::array<double, N>& dst, const V& src, int offset = 0) {
  for (int i = 0; i < static_cast<int>(src.size()); ++i) {
    dst[static_cast<std::size_t>(offset + i)] = src[i];
  }
}

}  // namespace

RunResult simulate(const Scenario& scenario, const LoopGains& gains, const SimConfig& config) {
  config.validate();
  gains.validate();
  scenario.noise.validate();
  scenario.trajectory.validate();
  if (scenario.duration < 0.0) throw ConfigurationError("scenario: duration must be >= 0");
  // Every axis must map to a feasible PID triple.
  for (const auto* loop : {&gains.outer, &gains.inner}) {
    for (int i = 0; i < 3; ++i) {
      const auto pid = pid_from_backstepping(loop->k1[i], loop->k2[i], loop->gamma[i], false);
      const auto back = backstepping_from_pid(pid.kP, pid.kD, loop->gamma[i]);
      if (!back.feasible) {
        throw InfeasibleGains(describe_infeasibility(pid.kP, pid.kD, loop->gamma[i]));
      }
    }
  }

  RunResult result;
  const auto& nominal = config.vehicle;
  result.d_bar_outer = config.d_bar_outer.value_or(default_d_bar_outer(nominal, scenario.payload));
  result.d_bar_inner = config.d_bar_inner.value_or(default_d_bar_inner(nominal, scenario.payload));

  const auto trajectory = make_trajectory(scenario.trajectory);
  const auto outer_model = quad::translational_model(nominal, config.theta_limit,
                                                     0.0);

  LoopOptions outer_opts;
  outer_opts.form = config.form;
  outer_opts.adjusted = config.adjusted;
  outer_opts.robust = {config.robust_mode, config.robust_epsilon, config.robust_k20.head(3)};
  outer_opts.e1_dot_tau = config.e1_dot_tau;
  LoopOptions inner_opts = outer_opts;
  inner_opts.robust.k20 = config.robust_k20.tail(3);
  IcsLoop outer(gains.outer, outer_opts, result.d_bar_outer);
  IcsLoop inner(gains.inner, inner_opts, result.d_bar_inner);

  const std::vector<Bounds1D> theta_bounds(2, Bounds1D::symmetric(config.theta_limit));
  RlsEstimator rls(RlsState::initial(2, config.rls_p0, config.rls_lambda), theta_bounds);
  SensorModel sensor(scenario.noise, config.dt_control, scenario.seed);
  DerivativeFilter roll_ref(config.attitude_ref_tau), pitch_ref(config.attitude_ref_tau);

  const double dtc = config.dt_control;
  const int substeps = static_cast<int>(std::lround(dtc / config.dt_plant));
  const double dtp = dtc / substeps;
  const auto steps = static_cast<long>(std::floor(scenario.duration / dtc + 1e-9));

  // Start at rest on the first reference point with rotors carrying the weight.
  quad::QuadState state;
  const auto start = trajectory(0.0);
  state.xi = start.pos;
  state.eta[2] = start.yaw;
  {
    const auto initial = scenario.payload.active_at(0.0)
                             ? quad::composite_inertia(nominal, scenario.payload)
                             : nominal;
    state.omega.setConstant(std::sqrt(initial.mass * initial.gravity / (4.0 * initial.kt)));
  }

  // Estimator memory: previous rates, torque, thrust and attitude.
  std::optional<Measurement> prev_meas;
  Vec3 prev_torque = Vec3::Zero();
  double prev_thrust = 0.0;
  LowPass lp_y, lp_phi;
  const double rls_alpha =
      config.rls_filter_tau > 0.0 ? dtc / (config.rls_filter_tau + dtc) : 1.0;

  const double min_vertical = 0.3 * nominal.mass * nominal.gravity;
  const double tilt_tan = std::tan(config.max_tilt);
  Vec theta_hat = Vec::Zero(2);

  result.telemetry.reserve(static_cast<std::size_t>(steps));
  try {
    for (long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * dtc;
      const Measurement meas = sensor.measure(state);
      const TrajectorySample ref = trajectory(t);

      if (config.rls_enabled && prev_meas) {
        const Vec3 eta_ddot = (meas.eta_dot - prev_meas->eta_dot) / dtc;
        const Mat phi2 = quad::regressor_phi2(prev_thrust, prev_meas->eta, nominal.inertia(0, 0),
                                              nominal.inertia(1, 1));
        const Mat jr = nominal.inertia * quad::euler_rate_matrix(prev_meas->eta);
        const Vec y = eta_ddot - jr.partialPivLu().solve(prev_torque);
        const Mat& yf = lp_y.update(y, rls_alpha);
        const Mat& phif = lp_phi.update(phi2, rls_alpha);
        theta_hat = rls.update(phif, yf.col(0));
      }

      // Position loop.
      const StatePoint outer_point{t, meas.xi, meas.xi_dot};
      const Reference outer_ref{ref.pos, ref.vel, ref.acc};
      Vec3 u = outer.step(outer_model, outer_point, outer_ref, theta_hat, dtc);
      bool saturated = false;
      if (u[2] < min_vertical) {
        u[2] = min_vertical;
        saturated = true;
      }
      const double lateral = u.head<2>().norm();
      if (lateral > tilt_tan * u[2]) {
        u.head<2>() *= tilt_tan * u[2] / lateral;
        saturated = true;
      }
      const auto cmd = quad::thrust_and_attitude_from_u(u, meas.eta[2]);
      saturated = saturated || cmd.clamped;

      // Attitude loop.
      roll_ref.update(cmd.roll, dtc);
      pitch_ref.update(cmd.pitch, dtc);
      const Reference inner_ref{Vec(Vec3(cmd.roll, cmd.pitch, ref.yaw)),
                                Vec(Vec3(roll_ref.rate(), pitch_ref.rate(), ref.yaw_rate)),
                                Vec(Vec3(roll_ref.accel(), pitch_ref.accel(), ref.yaw_acc))};
      const auto att_model =
          quad::attitude_model(nominal, cmd.thrust, config.theta_limit, 0.0);
      const StatePoint inner_point{t, meas.eta, meas.eta_dot};
      const Vec3 torque = inner.step(att_model, inner_point, inner_ref, theta_hat, dtc);

      const auto mix = quad::rotor_mixing(cmd.thrust, torque, nominal);
      saturated = saturated || mix.saturated;

      TelemetryRow row;
      row.t = t;
      copy_to(row.pose, state.xi);
      copy_to(row.pose, state.eta, 3);
      copy_to(row.ref, ref.pos);
      copy_to(row.ref, inner_ref.x1d, 3);
      for (std::size_t i = 0; i < 6; ++i) row.err[i] = row.pose[i] - row.ref[i];
      row.u = {cmd.thrust, torque[0], torque[1], torque[2]};
      copy_to(row.d_c_hat, outer.state().d_c_hat);
      copy_to(row.d_c_hat, inner.state().d_c_hat, 3);
      copy_to(row.theta_hat, theta_hat);
      copy_to(row.omega_sq, state.omega.cwiseProduct(state.omega));
      row.payload = scenario.payload.active_at(t);
      row.gust = scenario.gust && scenario.gust->active_at(t);
      row.saturated = saturated;
      result.telemetry.push_back(row);

      prev_meas = meas;
      prev_torque = torque;
      prev_thrust = cmd.thrust;

      const Vec4 omega_cmd = mix.omega_sq.cwiseSqrt();
      for (int j = 0; j < substeps; ++j) {
        const double tp = t + j * dtp;
        const auto params = scenario.payload.active_at(tp)
                                ? quad::composite_inertia(nominal, scenario.payload)
                                : nominal;
        state.omega = quad::motor_lag(omega_cmd, state.omega, config.motor_tau, dtp);
        const auto wrench = quad::rotor_wrench(state.omega.cwiseProduct(state.omega), params);
        const Vec3 force_body(0.0, 0.0, wrench.thrust);
        quad::Disturbance delta;
        if (scenario.gust) {
          const double e = scenario.gust->envelope(tp);
          delta.force = e * scenario.gust->force;
          delta.torque = e * scenario.gust->torque;
        }
        const Vec4 omega = state.omega;
        const auto deriv = [&](double, const quad::Vec12& x) {
          return quad::dynamics(quad::QuadState::unpack(x, omega), params, force_body,
                                wrench.torque, delta);
        };
        state = quad::QuadState::unpack(rk4_step(deriv, tp, state.pack(), dtp), omega);
        if (config.ground_contact && state.xi.z() < 0.0) {
          // Inelastic floor with sticking friction.
          state.xi.z() = 0.0;
          if (state.xi_dot.z() < 0.0) state.xi_dot.setZero();
        }
      }
    }
  } catch (const quad::SimulationFault& e) {
    result.fault = e.what();
  } catch (const SingularityError& e) {
    result.fault = e.what();
  } catch (const DomainError& e) {
    result.fault = e.what();
  }

  result.rls_resets = rls.resets();
  if (!result.telemetry.empty()) {
    result.metrics = metrics(result.telemetry, config.score_margin);
  }
  return result;
}

RunMetrics metrics(std::span<const TelemetryRow> telemetry, double t_from, double t_to) {
  if (telemetry.empty()) throw ContractViolation("metrics: empty telemetry");
  RunMetrics m;
  std::size_t count = 0;
  std::array<double, 4> sq{};
  for (const auto& row : telemetry) {
    if (row.saturated) ++m.saturation_count;
    if (row.t < t_from || row.t > t_to) continue;
    ++count;
    for (std::size_t i = 0; i < 6; ++i) {
      const double a = std::abs(row.err[i]);
      m.mae[i] += a;
      m.max_error[i] = std::max(m.max_error[i], a);
    }
    for (std::size_t i = 0; i < 4; ++i) sq[i] += row.u[i] * row.u[i];
  }
  if (count == 0) throw ContractViolation("metrics: scoring window contains no samples");
  for (auto& v : m.mae) v /= static_cast<double>(count);
  for (std::size_t i = 0; i < 4; ++i) m.rms_control[i] = std::sqrt(sq[i] / static_cast<double>(count));
  return m;
}

RunMetrics metrics(std::span<const TelemetryRow> telemetry, double margin) {
  if (telemetry.empty()) throw ContractViolation("metrics: empty telemetry");
  const double t0 = telemetry.front().t + margin;
  const double t1 = telemetry.back().t - margin;
  if (t1 < t0) return metrics(telemetry, telemetry.front().t, telemetry.back().t);
  return metrics(telemetry, t0, t1);
}

Scenario figure8_scenario() {
  Scenario s;
  s.name = "figure8";
  s.trajectory.kind = TrajectoryKind::kFigureEight;
  s.duration = s.trajectory.total_duration();
  s.payload = {0.2, Vec3(0.05, 0.05, -0.1), true, 0.0,
               std::numeric_limits<double>::infinity()};
  quad::WindGust gust;
  gust.onset = 11.0;
  gust.force = quad::WindGust::drag_force(5.0, Vec3(1.0, 1.0, 0.0));
  gust.profile = quad::GustProfile::kRamped;
  gust.rise_time = 0.5;
  gust.duration = 4.0;
  s.gust = gust;
  s.noise = {0.002, 0.002, 0.01, 1, 0.01};
  s.seed = 1;
  return s;
}

Scenario payload_drop_scenario() {
  Scenario s;
  s.name = "payload_drop";
  auto& tr = s.trajectory;
  tr.kind = TrajectoryKind::kLateralMove;
  tr.takeoff = 4.0;
  tr.settle = 9.0;
  tr.land = 4.0;
  tr.move_x = 1.0;
  tr.move_y = 0.5;
  tr.move_duration = 8.0;
  s.duration = tr.total_duration();
  s.payload = {0.2, Vec3(0.0, 0.0, -0.1), true, 0.0, 18.0};
  s.noise = {0.002, 0.002, 0.01, 1, 0.01};
  s.seed = 1;
  return s;
}

Scenario hover_scenario() {
  Scenario s;
  s.name = "hover";
  auto& tr = s.trajectory;
  tr.kind = TrajectoryKind::kHover;
  tr.hold = 0.5;
  tr.takeoff = 2.0;
  tr.settle = 0.0;
  tr.hover_time = 10.0;
  tr.land = 2.0;
  s.duration = tr.total_duration();
  return s;
}

}  // namespace abpid
