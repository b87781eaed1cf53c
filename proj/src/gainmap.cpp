#include "abpid/gainmap.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace abpid {

void BacksteppingGains::validate() const {
  const auto n = k1.size();
  if (n == 0 || k2.size() != n || gamma.size() != n) {
    throw ConfigurationError("backstepping gains: k1, k2 and gamma must have equal, non-zero size");
  }
  if (!k1.allFinite() || !k2.allFinite() || !gamma.allFinite()) {
    throw ConfigurationError("backstepping gains: non-finite entry");
  }
  if ((k1.array() <= 0.0).any() || (k2.array() <= 0.0).any()) {
    throw ConfigurationError("backstepping gains: k1 and k2 must be strictly positive");
  }
  if ((gamma.array() < 0.0).any()) {
    throw ConfigurationError("backstepping gains: gamma must be non-negative");
  }
}

BacksteppingGains BacksteppingGains::segment(int first, int count) const {
  return {k1.segment(first, count), k2.segment(first, count), gamma.segment(first, count)};
}

AxisPid pid_from_backstepping(double k1, double k2, double gamma, bool adjusted) {
  if (!(k1 > 0.0) || !(k2 > 0.0)) {
    throw ContractViolation("pid_from_backstepping: k1 and k2 must be positive");
  }
  if (!(gamma >= 0.0)) {
    throw ContractViolation("pid_from_backstepping: gamma must be non-negative");
  }
  AxisPid pid;
  pid.kP = 1.0 + k1 * k2 + (adjusted ? gamma : 0.0);
  pid.kD = k1 + k2;
  pid.kI = gamma * k1;
  return pid;
}

PidGains pid_from_backstepping(const BacksteppingGains& gains, bool adjusted) {
  gains.validate();
  const auto n = gains.size();
  PidGains pid{Vec(n), Vec(n), Vec(n)};
  for (int i = 0; i < n; ++i) {
    const auto axis = pid_from_backstepping(gains.k1[i], gains.k2[i], gains.gamma[i], adjusted);
    pid.kP[i] = axis.kP;
    pid.kD[i] = axis.kD;
    pid.kI[i] = axis.kI;
  }
  return pid;
}

GainConversionResult backstepping_from_pid(double kP, double kD, double gamma) {
  if (!(kD > 0.0)) {
    throw ContractViolation("backstepping_from_pid: kD must be positive");
  }
  if (!std::isfinite(kP) || !(gamma >= 0.0)) {
    throw ContractViolation("backstepping_from_pid: kP must be finite and gamma non-negative");
  }
  GainConversionResult r;
  const double c = kP - gamma - 1.0;  // product of the roots
  double disc = kD * kD - 4.0 * c;
  if (std::abs(disc) <= kDiscriminantTolerance * std::max(1.0, kD * kD)) disc = 0.0;
  r.discriminant = disc;
  if (disc < 0.0) {
    r.reason = Infeasibility::kComplexRoots;
    return r;
  }
  // Larger root from the sum, smaller one from the product to avoid cancellation.
  r.k1 = 0.5 * (kD + std::sqrt(disc));
  r.k2 = disc == 0.0 ? r.k1 : c / r.k1;
  r.boundary = disc == 0.0;
  if (!(r.k2 > 0.0)) {
    r.reason = Infeasibility::kNonPositiveRoot;
    return r;
  }
  r.feasible = true;
  return r;
}

BacksteppingGains backstepping_from_pid(const Vec& kP, const Vec& kD, const Vec& gamma) {
  const auto n = kP.size();
  if (kD.size() != n || gamma.size() != n) {
    throw ContractViolation("backstepping_from_pid: dimension mismatch");
  }
  BacksteppingGains g{Vec(n), Vec(n), gamma};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = backstepping_from_pid(kP[i], kD[i], gamma[i]);
    if (!r.feasible) {
      throw InfeasibleGains(fmt::format("axis {}: {}", i + 1,
                                        describe_infeasibility(kP[i], kD[i], gamma[i])));
    }
    g.k1[i] = r.k1;
    g.k2[i] = r.k2;
  }
  return g;
}

double kp_max(double kD, double gamma) { return kD * kD / 4.0 + 1.0 + gamma; }

double kd_min(double kP, double gamma) {
  double radicand = kP - gamma - 1.0;
  if (std::abs(radicand) <= kDiscriminantTolerance * std::max(1.0, std::abs(kP))) radicand = 0.0;
  if (radicand < 0.0) {
    throw DomainError(fmt::format("kd_min: k_P={} is below 1 + gamma = {}", kP, 1.0 + gamma));
  }
  return 2.0 * std::sqrt(radicand);
}

std::string describe_infeasibility(double kP, double kD, double gamma) {
  const auto r = backstepping_from_pid(kP, kD, gamma);
  switch (r.reason) {
    case Infeasibility::kComplexRoots:
      return fmt::format(
          "k_P={:.2f} exceeds k_P,max={:.2f} for k_D={:.2f}, gamma={:.2f} "
          "(equivalently k_D is below k_D,min={:.2f})",
          kP, kp_max(kD, gamma), kD, gamma, kd_min(kP, gamma));
    case Infeasibility::kNonPositiveRoot:
      return fmt::format("k_P={:.2f} must exceed 1 + gamma = {:.2f} for a positive k2", kP,
                         1.0 + gamma);
    case Infeasibility::kNone:
      break;
  }
  return "feasible";
}

std::vector<FeasibilityPoint> feasibility_sweep(const GridRange& kp_range,
                                                const GridRange& kd_range, double gamma,
                                                int resolution) {
  if (resolution < 2) {
    throw ContractViolation("feasibility_sweep: resolution must be at least 2");
  }
  if (!(kp_range.lo <= kp_range.hi) || !(kd_range.lo <= kd_range.hi)) {
    throw ContractViolation("feasibility_sweep: empty range");
  }
  if (!(kd_range.lo > 0.0)) {
    throw ContractViolation("feasibility_sweep: kD range must be positive");
  }
  const auto step = [resolution](const GridRange& r, int i) {
    if (i == resolution - 1) return r.hi;
    return r.lo + (r.hi - r.lo) * static_cast<double>(i) / (resolution - 1);
  };
  std::vector<FeasibilityPoint> points;
  points.reserve(static_cast<std::size_t>(resolution) * resolution);
  for (int j = 0; j < resolution; ++j) {
    const double kD = step(kd_range, j);
    for (int i = 0; i < resolution; ++i) {
      const double kP = step(kp_range, i);
      const auto r = backstepping_from_pid(kP, kD, gamma);
      FeasibilityPoint p{kP, kD, gamma, r.feasible, std::nullopt, std::nullopt};
      if (r.feasible) {
        p.k1 = r.k1;
        p.k2 = r.k2;
      }
      points.push_back(p);
    }
  }
  return points;
}

void write_feasibility_csv(std::ostream& out, std::span<const FeasibilityPoint> points) {
  out << "kP,kD,gamma,feasible,k1,k2\n";
  for (const auto& p : points) {
    out << fmt::format("{:.17g},{:.17g},{:.17g},{},", p.kP, p.kD, p.gamma, p.feasible ? 1 : 0);
    if (p.k1) out << fmt::format("{:.17g}", *p.k1);
    out << ',';
    if (p.k2) out << fmt::format("{:.17g}", *p.k2);
    out << '\n';
  }
}

}  // namespace abpid
