#pragma once

#include "abpid/core.hpp"
#include "abpid/gains.hpp"

#include <optional>
#include <vector>

namespace abpid {

enum class RobustMode { kConstant, kNonlinear };

/// Robust feedback u_r: either -h^2/(4 epsilon) e2 or the constant substitute
/// -k20 e2.
struct RobustTermConfig {
  RobustMode mode = RobustMode::kConstant;
  double epsilon = 1.0;
  Vec k20;  // empty means zero

  void validate(int n) const;
  Vec k20_or_zero(int n) const;
};

/// Adaptation and filter memory of one control loop.
struct ControllerState {
  Vec d_c_hat;          // lumped low-frequency disturbance estimate
  Vec e1_integral;      // integral state of the PID form
  Vec e1_dot_filtered;  // low-passed e1_dot
  Vec u_prev;           // last control input, used by h_bound
  double d_bar = 0.0;   // |d_c_hat_i| <= d_bar
  Vec integral_bound;   // |e1_integral_i| <= integral_bound_i

  /// Zero state. The integral bound of axis i is d_bar / kI_i, so that the
  /// integral and d_c_hat live in matching sets (infinite when kI_i == 0).
  static ControllerState initial(int n, double d_bar, const Vec& kI);
  static ControllerState initial(int n, double d_bar);

  std::vector<Bounds1D> disturbance_bounds() const;
  std::vector<Bounds1D> integral_bounds() const;
};

struct Reference {
  Vec x1d;
  Vec x1d_dot;
  Vec x1d_ddot;
};

struct ControlOutput {
  Vec u;
  ControllerState state;
};

/// Derivative of the virtual control, X1d'' - k1 e1_dot.
Vec alpha_dot(const Vec& x1d_ddot, const Vec& e1_dot, const Vec& k1);

Vec robust_term(const ErrorSignals& errs, double h, const RobustTermConfig& robust);

/// Right-hand side of the bound that h must dominate, evaluated with the
/// previous control input standing in for U.
double h_bound(const SystemModel& model, const Mat& phi_val, const Vec& u_prev);

/// Adaptive robust backstepping law. Advances d_c_hat by one projected Euler
/// step of gamma*e2.
ControlOutput control_arc(const SystemModel& model, const StatePoint& point,
                          const ErrorSignals& errs, const Vec& alpha_dot,
                          const Vec& theta_hat, const ControllerState& state,
                          const BacksteppingGains& gains, const RobustTermConfig& robust,
                          double dt);

/// Gains with the constant robust gain added to k2, the form in which the
/// backstepping law matches the PID law exactly.
BacksteppingGains fold_robust_gain(const BacksteppingGains& gains, const RobustTermConfig& robust);

/// Two-DOF PID form with model feedforward. With `adjusted` the integrator
/// runs on e1 and gamma is carried by kP; otherwise the integrator runs on
/// e1 + k1^-1 e1_dot. `e1_dot` overrides X2 - X1d_dot (e.g. a filtered value).
ControlOutput control_pid(const SystemModel& model, const StatePoint& point, const Reference& ref,
                          const Vec& theta_hat, const ControllerState& state, const PidGains& pid,
                          const BacksteppingGains& gains, bool adjusted, double dt,
                          const std::optional<Vec>& e1_dot = std::nullopt);

/// First-order low-pass on e1_dot; tau_f == 0 passes `raw` through. Updates
/// state.e1_dot_filtered and returns it.
Vec filter_e1_dot(const Vec& raw, ControllerState& state, double tau_f, double dt);

enum class ControlForm { kPid, kArc };

struct LoopOptions {
  ControlForm form = ControlForm::kPid;
  bool adjusted = true;
  RobustTermConfig robust;
  double e1_dot_tau = 0.0;
};

/// Stateful wrapper stepping one loop with a fixed gain set.
class IcsLoop {
 public:
  IcsLoop(BacksteppingGains gains, LoopOptions options, double d_bar);

  Vec step(const SystemModel& model, const StatePoint& point, const Reference& ref,
           const Vec& theta_hat, double dt);

  const ControllerState& state() const { return state_; }
  const BacksteppingGains& gains() const { return gains_; }
  const PidGains& pid() const { return pid_; }

 private:
  BacksteppingGains gains_;
  BacksteppingGains effective_;
  PidGains pid_;
  LoopOptions options_;
  ControllerState state_;
};

}  // namespace abpid
