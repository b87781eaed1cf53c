#include "abpid/estimator.hpp"

#include <Eigen/Eigenvalues>

namespace abpid {

namespace {

void check_positive_definite(const Mat& p) {
  if (!p.allFinite()) throw CovarianceError("RLS covariance is not finite");
  Eigen::SelfAdjointEigenSolver<Mat> eig(p, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw CovarianceError("RLS covariance lost positive definiteness");
  }
}

}  // namespace

RlsState RlsState::initial(int l, double p0, double lambda) {
  RlsState s;
  s.theta_hat = Vec::Zero(l);
  s.P = p0 * Mat::Identity(l, l);
  s.lambda = lambda;
  s.validate();
  return s;
}

void RlsState::validate() const {
  const auto l = theta_hat.size();
  if (l == 0 || P.rows() != l || P.cols() != l) {
    throw ContractViolation("RLS state: dimension mismatch");
  }
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw ContractViolation("RLS state: forgetting factor must be in (0, 1]");
  }
}

RlsState rls_update(const RlsState& state, const Vec& regressor, double residual,
                    std::span<const Bounds1D> bounds) {
  return rls_update(state, Mat(regressor.transpose()), Vec::Constant(1, residual), bounds);
}

RlsState rls_update(const RlsState& state, const Mat& regressor, const Vec& residual,
                    std::span<const Bounds1D> bounds) {
  state.validate();
  const auto l = state.theta_hat.size();
  const auto m = regressor.rows();
  if (regressor.cols() != l || residual.size() != m ||
      static_cast<Eigen::Index>(bounds.size()) != l) {
    throw ContractViolation("rls_update: dimension mismatch");
  }
  require_finite(regressor, "rls_update regressor");
  require_finite(residual, "rls_update residual");
  check_positive_definite(state.P);

  const Mat& P = state.P;
  const Mat PHt = P * regressor.transpose();
  const Mat S = state.lambda * Mat::Identity(m, m) + regressor * PHt;
  const Mat K = S.ldlt().solve(PHt.transpose()).transpose();  // l x m

  RlsState next = state;
  next.theta_hat = state.theta_hat + K * residual;
  for (Eigen::Index i = 0; i < l; ++i) {
    next.theta_hat[i] = bounds[static_cast<std::size_t>(i)].clamp(next.theta_hat[i]);
  }
  next.P = (P - K * PHt.transpose()) / state.lambda;
  next.P = 0.5 * (next.P + next.P.transpose()).eval();
  check_positive_definite(next.P);
  return next;
}

RlsEstimator::RlsEstimator(RlsState prior, std::vector<Bounds1D> bounds)
    : prior_(std::move(prior)), state_(prior_), bounds_(std::move(bounds)) {
  prior_.validate();
  if (static_cast<Eigen::Index>(bounds_.size()) != prior_.theta_hat.size()) {
    throw ContractViolation("RlsEstimator: bounds size mismatch");
  }
  for (const auto& b : bounds_) b.validate();
}

const Vec& RlsEstimator::update(const Mat& regressor, const Vec& measurement) {
  const Vec residual = measurement - regressor * state_.theta_hat;
  try {
    state_ = rls_update(state_, regressor, residual, bounds_);
  } catch (const CovarianceError&) {
    const Vec keep = state_.theta_hat;
    state_ = prior_;
    state_.theta_hat = keep;
    ++resets_;
  }
  return state_.theta_hat;
}

}  // namespace abpid
