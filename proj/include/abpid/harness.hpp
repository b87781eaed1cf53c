#pragma once

#include "abpid/controller.hpp"
#include "abpid/quadrotor.hpp"
#include "abpid/trajectory.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace abpid {

/// Classical fourth-order Runge-Kutta step of x' = deriv(t, x).
/// Throws quad::SimulationFault if the result is not finite.
template <class Deriv, class State>
State rk4_step(Deriv&& deriv, double t, const State& x, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("rk4_step: dt must be positive");
  const State k1 = deriv(t, x);
  const State k2 = deriv(t + 0.5 * dt, State(x + (0.5 * dt) * k1));
  const State k3 = deriv(t + 0.5 * dt, State(x + (0.5 * dt) * k2));
  const State k4 = deriv(t + dt, State(x + dt * k3));
  State next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw quad::SimulationFault("rk4_step: non-finite state");
  return next;
}

struct SensorNoise {
  double position_sigma = 0.0;  // m
  double attitude_sigma = 0.0;  // rad
  double rate_sigma = 0.0;      // m/s and rad/s
  int feedback_delay = 0;       // control steps
  double lowpass_tau = 0.0;     // s, 0 disables conditioning

  void validate() const;
};

struct Measurement {
  quad::Vec3 xi = quad::Vec3::Zero();
  quad::Vec3 eta = quad::Vec3::Zero();
  quad::Vec3 xi_dot = quad::Vec3::Zero();
  quad::Vec3 eta_dot = quad::Vec3::Zero();
};

/// Gaussian noise, first-order low-pass and a pure delay, sampled once per
/// control step.
class SensorModel {
 public:
  SensorModel(SensorNoise noise, double dt, std::uint64_t seed);

  Measurement measure(const quad::QuadState& truth);

 private:
  SensorNoise noise_;
  double dt_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::optional<Measurement> filtered_;
  std::deque<Measurement> pipeline_;
};

struct Scenario {
  std::string name = "figure8";
  double duration = 0.0;
  TrajectorySpec trajectory;
  quad::Payload payload;
  std::optional<quad::WindGust> gust;
  SensorNoise noise;
  std::uint64_t seed = 1;
};

/// Gains of the position loop (x, y, z) and the attitude loop (roll, pitch, yaw).
struct LoopGains {
  BacksteppingGains outer;
  BacksteppingGains inner;

  /// Splits six-axis diagonals into the two loops.
  static LoopGains from_axes(const Vec& k1, const Vec& k2, const Vec& gamma);
  static LoopGains baseline();
  /// baseline() with x/y retuned for k_D = 4 at unchanged k_P.
  static LoopGains fine_tuned();
  /// fine_tuned() with a stiffer altitude axis (k2 = 2, gamma = 2) so the
  /// integral recovers a sudden loss of carried mass within a few seconds.
  static LoopGains payload_drop();
  BacksteppingGains stacked() const;
  void validate() const;
};

struct SimConfig {
  double dt_plant = 1e-3;
  double dt_control = 5e-3;
  ControlForm form = ControlForm::kPid;
  bool adjusted = true;
  RobustMode robust_mode = RobustMode::kConstant;
  double robust_epsilon = 1.0;
  Vec robust_k20 = Vec::Zero(6);
  double e1_dot_tau = 0.0;
  std::optional<double> d_bar_outer;
  std::optional<double> d_bar_inner;
  double motor_tau = 0.015;
  bool rls_enabled = true;
  double rls_lambda = 0.995;
  double rls_p0 = 10.0;
  double rls_filter_tau = 0.05;
  double theta_limit = 0.02;
  double attitude_ref_tau = 0.05;
  double max_tilt = 0.6;  // rad
  double score_margin = 1.0;
  bool ground_contact = true;  // floor at z = 0
  quad::QuadrotorParams vehicle;

  void validate() const;
};

struct TelemetryRow {
  double t = 0.0;
  std::array<double, 6> pose{};
  std::array<double, 6> ref{};
  std::array<double, 6> err{};
  std::array<double, 4> u{};  // F_tc, T1c, T2c, T3c
  std::array<double, 6> d_c_hat{};
  std::array<double, 2> theta_hat{};
  std::array<double, 4> omega_sq{};
  bool payload = false;
  bool gust = false;
  bool saturated = false;
};

struct RunMetrics {
  std::array<double, 6> mae{};
  std::array<double, 6> max_error{};
  std::array<double, 4> rms_control{};
  int saturation_count = 0;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<TelemetryRow> telemetry;
  std::optional<std::string> fault;
  double d_bar_outer = 0.0;
  double d_bar_inner = 0.0;
  int rls_resets = 0;
};

/// Outer-loop disturbance bound: twice the payload's gravity-normalized
/// mismatch, at least 1 m/s^2.
double default_d_bar_outer(const quad::QuadrotorParams& vehicle, const quad::Payload& payload);
/// Inner-loop bound: twice the CoM-offset moment of the laden vehicle over
/// J_xx, at least 1 rad/s^2.
double default_d_bar_inner(const quad::QuadrotorParams& vehicle, const quad::Payload& payload);

/// Runs the cascaded position/attitude loops against the plant. Throws
/// InfeasibleGains / ConfigurationError before the run; plant faults end the
/// run and are reported in RunResult::fault.
RunResult simulate(const Scenario& scenario, const LoopGains& gains, const SimConfig& config);

/// Mean/max absolute error and RMS control over rows with t in [t_from, t_to].
/// Throws ContractViolation on empty telemetry.
RunMetrics metrics(std::span<const TelemetryRow> telemetry, double t_from, double t_to);

/// Scores everything except `margin` seconds at each end; falls back to the
/// whole run when that leaves nothing.
RunMetrics metrics(std::span<const TelemetryRow> telemetry, double margin);

Scenario figure8_scenario();
Scenario payload_drop_scenario();
Scenario hover_scenario();

}  // namespace abpid
