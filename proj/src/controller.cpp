#include "abpid/controller.hpp"

#include "abpid/gainmap.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace abpid {

namespace {

constexpr double kGainConsistencyTolerance = 1e-9;

bool close_rel(double a, double b) {
  return std::abs(a - b) <= kGainConsistencyTolerance * std::max(1.0, std::abs(b));
}

void check_pid_consistency(const PidGains& pid, const BacksteppingGains& gains, bool adjusted) {
  const auto expected = pid_from_backstepping(gains, adjusted);
  if (pid.size() != expected.size()) {
    throw ConfigurationError("control_pid: PID and backstepping gains differ in size");
  }
  for (int i = 0; i < pid.size(); ++i) {
    if (!close_rel(pid.kP[i], expected.kP[i]) || !close_rel(pid.kD[i], expected.kD[i]) ||
        !close_rel(pid.kI[i], expected.kI[i])) {
      throw ConfigurationError(fmt::format(
          "control_pid: axis {} PID gains ({}, {}, {}) do not match the backstepping gains "
          "({}, {}, {})",
          i + 1, pid.kP[i], pid.kD[i], pid.kI[i], expected.kP[i], expected.kD[i],
          expected.kI[i]));
    }
  }
}

void check_state(const ControllerState& s, int n) {
  if (s.d_c_hat.size() != n || s.e1_integral.size() != n || s.e1_dot_filtered.size() != n ||
      s.u_prev.size() != n || s.integral_bound.size() != n) {
    throw ContractViolation("controller state: dimension mismatch");
  }
  require_finite(s.d_c_hat, "d_c_hat");
  require_finite(s.e1_integral, "e1_integral");
}

/// Model feedforward terms f + phi*theta_hat evaluated at `point`.
Vec model_drift(const SystemModel& model, const StatePoint& point, const Vec& theta_hat,
                Mat* phi_out = nullptr) {
  require_size(theta_hat, model.l, 1, "theta_hat");
  require_finite(theta_hat, "theta_hat");
  Vec f = model.f(point);
  Mat phi = model.phi(point);
  require_size(f, model.n, 1, "f");
  require_size(phi, model.n, model.l, "phi");
  Vec drift = f + phi * theta_hat;
  if (phi_out != nullptr) *phi_out = std::move(phi);
  return drift;
}

}  // namespace

void RobustTermConfig::validate(int n) const {
  if (!(epsilon > 0.0)) {
    throw ConfigurationError("robust term: epsilon must be positive");
  }
  if (k20.size() != 0 && k20.size() != n) {
    throw ConfigurationError("robust term: k20 size mismatch");
  }
  if (k20.size() != 0 && (k20.array() < 0.0).any()) {
    throw ConfigurationError("robust term: k20 must be non-negative");
  }
}

Vec RobustTermConfig::k20_or_zero(int n) const {
  return k20.size() == 0 ? Vec::Zero(n) : k20;
}

ControllerState ControllerState::initial(int n, double d_bar, const Vec& kI) {
  if (!(d_bar >= 0.0)) {
    throw ConfigurationError("controller state: d_bar must be non-negative");
  }
  if (kI.size() != n) {
    throw ConfigurationError("controller state: kI size mismatch");
  }
  ControllerState s;
  s.d_c_hat = Vec::Zero(n);
  s.e1_integral = Vec::Zero(n);
  s.e1_dot_filtered = Vec::Zero(n);
  s.u_prev = Vec::Zero(n);
  s.d_bar = d_bar;
  s.integral_bound.resize(n);
  for (int i = 0; i < n; ++i) {
    s.integral_bound[i] =
        kI[i] > 0.0 ? d_bar / kI[i] : std::numeric_limits<double>::infinity();
  }
  return s;
}

ControllerState ControllerState::initial(int n, double d_bar) {
  return initial(n, d_bar, Vec::Zero(n));
}

std::vector<Bounds1D> ControllerState::disturbance_bounds() const {
  return std::vector<Bounds1D>(static_cast<std::size_t>(d_c_hat.size()),
                               Bounds1D::symmetric(d_bar));
}

std::vector<Bounds1D> ControllerState::integral_bounds() const {
  std::vector<Bounds1D> b;
  b.reserve(static_cast<std::size_t>(integral_bound.size()));
  for (Eigen::Index i = 0; i < integral_bound.size(); ++i) {
    b.push_back(Bounds1D::symmetric(integral_bound[i]));
  }
  return b;
}

Vec alpha_dot(const Vec& x1d_ddot, const Vec& e1_dot, const Vec& k1) {
  return x1d_ddot - k1.cwiseProduct(e1_dot);
}

Vec robust_term(const ErrorSignals& errs, double h, const RobustTermConfig& robust) {
  const int n = static_cast<int>(errs.e2.size());
  robust.validate(n);
  if (!(h >= 0.0)) {
    throw ContractViolation("robust_term: h must be non-negative");
  }
  if (robust.mode == RobustMode::kNonlinear) {
    return -(h * h / (4.0 * robust.epsilon)) * errs.e2;
  }
  return -robust.k20_or_zero(n).cwiseProduct(errs.e2);
}

double h_bound(const SystemModel& model, const Mat& phi_val, const Vec& u_prev) {
  Vec theta_range(model.l);
  for (int i = 0; i < model.l; ++i) {
    const auto& b = model.theta_bounds[static_cast<std::size_t>(i)];
    theta_range[i] = b.hi - b.lo;
  }
  const Mat g_range = model.g_max - model.g_min;
  // Induced 2-norms for matrices, Euclidean for vectors.
  const auto op_norm = [](const Mat& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Mat>(m).singularValues()[0];
  };
  return op_norm(phi_val) * theta_range.norm() + u_prev.norm() * op_norm(g_range) +
         model.delta_bar;
}

ControlOutput control_arc(const SystemModel& model, const StatePoint& point,
                          const ErrorSignals& errs, const Vec& alpha_dot_val,
                          const Vec& theta_hat, const ControllerState& state,
                          const BacksteppingGains& gains, const RobustTermConfig& robust,
                          double dt) {
  const int n = model.n;
  gains.validate();
  robust.validate(n);
  if (gains.size() != n) throw ContractViolation("control_arc: gain size mismatch");
  check_state(state, n);
  for (const auto* v : {&errs.e1, &errs.e2, &alpha_dot_val}) {
    require_size(*v, n, 1, "control_arc input");
    require_finite(*v, "control_arc input");
  }
  if (!(dt >= 0.0)) throw ContractViolation("control_arc: dt must be non-negative");

  Mat phi;
  const Vec drift = model_drift(model, point, theta_hat, &phi);
  const Mat g = model.checked_g_hat(point);
  const double h =
      robust.mode == RobustMode::kNonlinear ? h_bound(model, phi, state.u_prev) : 0.0;
  const Vec u_r = robust_term(errs, h, robust);

  const Vec rhs = -errs.e1 + alpha_dot_val - drift - gains.k2.cwiseProduct(errs.e2) -
                  state.d_c_hat + u_r;
  ControlOutput out;
  out.u = g.partialPivLu().solve(rhs);
  out.state = state;
  out.state.u_prev = out.u;
  const auto bounds = state.disturbance_bounds();
  out.state.d_c_hat =
      projected_euler_step(state.d_c_hat, bounds, gains.gamma.cwiseProduct(errs.e2), dt);
  return out;
}

BacksteppingGains fold_robust_gain(const BacksteppingGains& gains,
                                   const RobustTermConfig& robust) {
  BacksteppingGains out = gains;
  if (robust.mode == RobustMode::kConstant) {
    out.k2 += robust.k20_or_zero(gains.size());
  }
  return out;
}

ControlOutput control_pid(const SystemModel& model, const StatePoint& point, const Reference& ref,
                          const Vec& theta_hat, const ControllerState& state, const PidGains& pid,
                          const BacksteppingGains& gains, bool adjusted, double dt,
                          const std::optional<Vec>& e1_dot) {
  const int n = model.n;
  check_pid_consistency(pid, gains, adjusted);
  if (pid.size() != n) throw ContractViolation("control_pid: gain size mismatch");
  check_state(state, n);
  for (const auto* v : {&point.x1, &point.x2, &ref.x1d, &ref.x1d_dot, &ref.x1d_ddot}) {
    require_size(*v, n, 1, "control_pid input");
    require_finite(*v, "control_pid input");
  }
  if (!(dt >= 0.0)) throw ContractViolation("control_pid: dt must be non-negative");

  const Vec e1 = point.x1 - ref.x1d;
  Vec de1 = e1_dot ? *e1_dot : Vec(point.x2 - ref.x1d_dot);
  require_size(de1, n, 1, "e1_dot");
  require_finite(de1, "e1_dot");

  const Vec drift = model_drift(model, point, theta_hat);
  const Mat g = model.checked_g_hat(point);
  const Vec rhs = -pid.kP.cwiseProduct(e1) - pid.kD.cwiseProduct(de1) -
                  pid.kI.cwiseProduct(state.e1_integral) + ref.x1d_ddot - drift;

  ControlOutput out;
  out.u = g.partialPivLu().solve(rhs);
  out.state = state;
  out.state.u_prev = out.u;
  const Vec rate = adjusted ? e1 : Vec(e1 + de1.cwiseQuotient(gains.k1));
  out.state.e1_integral =
      projected_euler_step(state.e1_integral, state.integral_bounds(), rate, dt);
  // Disturbance estimate implied by the integral action.
  out.state.d_c_hat = pid.kI.cwiseProduct(out.state.e1_integral);
  return out;
}

Vec filter_e1_dot(const Vec& raw, ControllerState& state, double tau_f, double dt) {
  if (!(tau_f >= 0.0)) throw ContractViolation("filter_e1_dot: tau_f must be non-negative");
  if (raw.size() != state.e1_dot_filtered.size()) {
    throw ContractViolation("filter_e1_dot: dimension mismatch");
  }
  if (tau_f == 0.0) {
    state.e1_dot_filtered = raw;
  } else {
    state.e1_dot_filtered += (dt / (tau_f + dt)) * (raw - state.e1_dot_filtered);
  }
  return state.e1_dot_filtered;
}

IcsLoop::IcsLoop(BacksteppingGains gains, LoopOptions options, double d_bar)
    : gains_(std::move(gains)), options_(std::move(options)) {
  gains_.validate();
  options_.robust.validate(gains_.size());
  effective_ = fold_robust_gain(gains_, options_.robust);
  const bool adjusted = options_.form == ControlForm::kPid && options_.adjusted;
  pid_ = pid_from_backstepping(effective_, adjusted);
  state_ = ControllerState::initial(gains_.size(), d_bar, pid_.kI);
}

Vec IcsLoop::step(const SystemModel& model, const StatePoint& point, const Reference& ref,
                  const Vec& theta_hat, double dt) {
  const Vec raw = point.x2 - ref.x1d_dot;
  const Vec de1 = filter_e1_dot(raw, state_, options_.e1_dot_tau, dt);
  ControlOutput out;
  if (options_.form == ControlForm::kPid) {
    out = control_pid(model, point, ref, theta_hat, state_, pid_, effective_, options_.adjusted,
                      dt, de1);
  } else {
    ErrorSignals errs = error_signals(point.x1, point.x2, ref.x1d, ref.x1d_dot, gains_.k1);
    errs.e1_dot = de1;
    errs.e2 = de1 + gains_.k1.cwiseProduct(errs.e1);
    out = control_arc(model, point, errs, alpha_dot(ref.x1d_ddot, de1, gains_.k1), theta_hat,
                      state_, gains_, options_.robust, dt);
  }
  out.state.e1_dot_filtered = state_.e1_dot_filtered;
  state_ = std::move(out.state);
  return out.u;
}

}  // namespace abpid
