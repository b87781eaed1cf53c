#pragma once

#include "abpid/core.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace abpid {

/// Covariance lost positive definiteness; the caller should reset to its prior.
class CovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exponential-forgetting recursive least squares.
struct RlsState {
  Vec theta_hat;
  Mat P;
  double lambda = 0.995;

  static RlsState initial(int l, double p0 = 10.0, double lambda = 0.995);
  void validate() const;
};

/// Scalar measurement update. `residual` is the prediction error
/// y - regressor' * theta_hat. The estimate is clamped to `bounds` afterwards.
RlsState rls_update(const RlsState& state, const Vec& regressor, double residual,
                    std::span<const Bounds1D> bounds);

/// Vector measurement update with rows(regressor) simultaneous equations
/// sharing one forgetting step.
RlsState rls_update(const RlsState& state, const Mat& regressor, const Vec& residual,
                    std::span<const Bounds1D> bounds);

/// Keeps a prior and falls back to it when the covariance degrades.
class RlsEstimator {
 public:
  RlsEstimator(RlsState prior, std::vector<Bounds1D> bounds);

  /// Rows of `regressor` multiply theta; `measurement` is the matching
  /// output. Returns the new estimate.
  const Vec& update(const Mat& regressor, const Vec& measurement);

  const RlsState& state() const { return state_; }
  const Vec& estimate() const { return state_.theta_hat; }
  int resets() const { return resets_; }

 private:
  RlsState prior_;
  RlsState state_;
  std::vector<Bounds1D> bounds_;
  int resets_ = 0;
};

}  // namespace abpid
