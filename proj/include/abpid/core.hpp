#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace abpid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A precondition of an operation was not met (bad dimensions, NaN input,
/// estimate outside its admissible set).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The input gain estimate cannot be inverted reliably.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent or invalid controller configuration.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a formula.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Tolerance used when deciding that an estimate sits on its bound.
inline constexpr double kSaturationTolerance = 1e-9;
/// Largest accepted 2-norm condition number of the input gain estimate.
inline constexpr double kMaxConditionNumber = 1e8;

struct Bounds1D {
  double lo = 0.0;
  double hi = 0.0;

  static Bounds1D symmetric(double radius) { return {-radius, radius}; }
  static Bounds1D unbounded();

  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }
  double clamp(double x) const;
  void validate() const;
};

/// Projection operator that halts adaptation at the bounds of the admissible
/// set. `x_hat` must lie in `bounds` (within kSaturationTolerance).
double proj(double x_hat, const Bounds1D& bounds, double value);

/// Elementwise proj.
Vec proj_vec(const Vec& x_hat, std::span<const Bounds1D> bounds, const Vec& value);

/// Forward-Euler step of x' = proj(x, value) followed by a clamp to the bounds.
Vec projected_euler_step(const Vec& x_hat, std::span<const Bounds1D> bounds,
                         const Vec& rate, double dt);

struct ErrorSignals {
  Vec e1;      // X1 - X1d
  Vec e1_dot;  // X2 - X1d_dot
  Vec e2;      // X2 - alpha
  Vec alpha;   // X1d_dot - k1 e1
};

/// Tracking errors and virtual control for diagonal gain `k1` (stored as the
/// diagonal).
ErrorSignals error_signals(const Vec& x1, const Vec& x2, const Vec& x1d,
                           const Vec& x1d_dot, const Vec& k1);

/// Point at which model terms are evaluated.
struct StatePoint {
  double t = 0.0;
  Vec x1;
  Vec x2;
};

/// Second-order plant  X1' = X2,  X2' = f + phi*theta + g*U + Delta.
///
/// Only the estimate g_hat of the input matrix is known; `g_min`/`g_max`
/// bound the true entries and `delta_bar` bounds the disturbance norm.
struct SystemModel {
  int n = 0;
  int l = 0;
  std::function<Vec(const StatePoint&)> f;
  std::function<Mat(const StatePoint&)> phi;
  std::function<Mat(const StatePoint&)> g_hat;
  std::vector<Bounds1D> theta_bounds;
  Mat g_min;
  Mat g_max;
  double delta_bar = 0.0;

  /// Checks dimensions and bound ordering. Throws ConfigurationError.
  void validate() const;

  /// Evaluates g_hat and rejects it when ill-conditioned.
  Mat checked_g_hat(const StatePoint& p) const;
};

/// Builds a model with constant f, phi and g_hat and zero-width g bounds.
SystemModel constant_model(const Vec& f, const Mat& phi, const Mat& g_hat,
                           std::vector<Bounds1D> theta_bounds, double delta_bar = 0.0);

double condition_number(const Mat& m);

/// Throws SingularityError when cond(m) exceeds kMaxConditionNumber.
void require_invertible(const Mat& m);

/// Throws ContractViolation when any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Mat>& m, const std::string& what);

void require_size(const Eigen::Ref<const Mat>& m, Eigen::Index rows, Eigen::Index cols,
                  const std::string& what);

}  // namespace abpid
