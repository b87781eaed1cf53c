#include "abpid/core.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace abpid {

Bounds1D Bounds1D::unbounded() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {-inf, inf};
}

double Bounds1D::clamp(double x) const { return std::clamp(x, lo, hi); }

void Bounds1D::validate() const {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw ConfigurationError(fmt::format("invalid bounds [{}, {}]", lo, hi));
  }
}

double proj(double x_hat, const Bounds1D& bounds, double value) {
  if (std::isnan(x_hat) || std::isnan(value)) {
    throw ContractViolation("proj: NaN input");
  }
  if (!bounds.contains(x_hat, kSaturationTolerance)) {
    throw ContractViolation(fmt::format("proj: estimate {} outside [{}, {}]", x_hat,
                                        bounds.lo, bounds.hi));
  }
  if (x_hat >= bounds.hi - kSaturationTolerance && value > 0.0) return 0.0;
  if (x_hat <= bounds.lo + kSaturationTolerance && value < 0.0) return 0.0;
  return value;
}

Vec proj_vec(const Vec& x_hat, std::span<const Bounds1D> bounds, const Vec& value) {
  const auto n = x_hat.size();
  if (value.size() != n || static_cast<Eigen::Index>(bounds.size()) != n) {
    throw ContractViolation("proj_vec: dimension mismatch");
  }
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = proj(x_hat[i], bounds[static_cast<std::size_t>(i)], value[i]);
  }
  return out;
}

Vec projected_euler_step(const Vec& x_hat, std::span<const Bounds1D> bounds,
                         const Vec& rate, double dt) {
  Vec next = x_hat + dt * proj_vec(x_hat, bounds, rate);
  for (Eigen::Index i = 0; i < next.size(); ++i) {
    next[i] = bounds[static_cast<std::size_t>(i)].clamp(next[i]);
  }
  return next;
}

ErrorSignals error_signals(const Vec& x1, const Vec& x2, const Vec& x1d,
                           const Vec& x1d_dot, const Vec& k1) {
  const auto n = x1.size();
  if (x2.size() != n || x1d.size() != n || x1d_dot.size() != n || k1.size() != n) {
    throw ContractViolation("error_signals: dimension mismatch");
  }
  if ((k1.array() <= 0.0).any()) {
    throw ContractViolation("error_signals: k1 must be positive");
  }
  ErrorSignals s;
  s.e1 = x1 - x1d;
  s.e1_dot = x2 - x1d_dot;
  s.alpha = x1d_dot - k1.cwiseProduct(s.e1);
  s.e2 = x2 - s.alpha;
  return s;
}

void SystemModel::validate() const {
  if (n <= 0 || l <= 0) {
    throw ConfigurationError("system model: n and l must be positive");
  }
  if (!f || !phi || !g_hat) {
    throw ConfigurationError("system model: missing evaluator");
  }
  if (static_cast<int>(theta_bounds.size()) != l) {
    throw ConfigurationError("system model: theta bounds size differs from l");
  }
  for (const auto& b : theta_bounds) b.validate();
  if (g_min.rows() != n || g_min.cols() != n || g_max.rows() != n || g_max.cols() != n) {
    throw ConfigurationError("system model: g bounds must be n x n");
  }
  if ((g_min.array() > g_max.array()).any()) {
    throw ConfigurationError("system model: g_min exceeds g_max");
  }
  if (!(delta_bar >= 0.0)) {
    throw ConfigurationError("system model: delta_bar must be non-negative");
  }
}

Mat SystemModel::checked_g_hat(const StatePoint& p) const {
  Mat g = g_hat(p);
  require_size(g, n, n, "g_hat");
  require_finite(g, "g_hat");
  require_invertible(g);
  return g;
}

SystemModel constant_model(const Vec& f, const Mat& phi, const Mat& g_hat,
                           std::vector<Bounds1D> theta_bounds, double delta_bar) {
  SystemModel m;
  m.n = static_cast<int>(f.size());
  m.l = static_cast<int>(phi.cols());
  m.f = [f](const StatePoint&) { return f; };
  m.phi = [phi](const StatePoint&) { return phi; };
  m.g_hat = [g_hat](const StatePoint&) { return g_hat; };
  m.theta_bounds = std::move(theta_bounds);
  m.g_min = g_hat;
  m.g_max = g_hat;
  m.delta_bar = delta_bar;
  m.validate();
  return m;
}

double condition_number(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return std::numeric_limits<double>::infinity();
  const double smallest = sv[sv.size() - 1];
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return sv[0] / smallest;
}

void require_invertible(const Mat& m) {
  const double c = condition_number(m);
  if (!(c <= kMaxConditionNumber)) {
    throw SingularityError(fmt::format("input gain estimate is singular (cond = {:.3g})", c));
  }
}

void require_finite(const Eigen::Ref<const Mat>& m, const std::string& what) {
  if (!m.allFinite()) {
    throw ContractViolation(what + ": non-finite value");
  }
}

void require_size(const Eigen::Ref<const Mat>& m, Eigen::Index rows, Eigen::Index cols,
                  const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ContractViolation(fmt::format("{}: expected {}x{}, got {}x{}", what, rows, cols,
                                        m.rows(), m.cols()));
  }
}

}  // namespace abpid
