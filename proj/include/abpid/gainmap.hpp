#pragma once

#include "abpid/gains.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace abpid {

/// Requested PID gains have no real, positive backstepping counterpart.
class InfeasibleGains : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Infeasibility {
  kNone,
  kComplexRoots,     // kP above kp_max(kD, gamma)
  kNonPositiveRoot,  // kP <= 1 + gamma
};

/// Roots of  k^2 - kD k + (kP - gamma - 1) = 0, ordered k1 >= k2.
struct GainConversionResult {
  double k1 = 0.0;
  double k2 = 0.0;
  double discriminant = 0.0;
  /// Repeated root (k1 == k2), i.e. kP sits exactly on kp_max.
  bool boundary = false;
  bool feasible = false;
  Infeasibility reason = Infeasibility::kNone;
};

struct AxisPid {
  double kP = 0.0;
  double kD = 0.0;
  double kI = 0.0;
};

/// Discriminants with magnitude below this (relative to max(1, kD^2)) are
/// treated as zero.
inline constexpr double kDiscriminantTolerance = 1e-12;

AxisPid pid_from_backstepping(double k1, double k2, double gamma, bool adjusted);
PidGains pid_from_backstepping(const BacksteppingGains& gains, bool adjusted);

/// Never throws for infeasible gains; inspect `feasible`/`reason`. Throws
/// ContractViolation when kD <= 0.
GainConversionResult backstepping_from_pid(double kP, double kD, double gamma);

/// Axis-by-axis conversion of (kP, kD) with the given gamma. Throws
/// InfeasibleGains naming the violated bound.
BacksteppingGains backstepping_from_pid(const Vec& kP, const Vec& kD, const Vec& gamma);

/// Largest admissible kP for a given kD.
double kp_max(double kD, double gamma);

/// Smallest admissible kD for a given kP. Throws DomainError if kP < 1 + gamma.
double kd_min(double kP, double gamma);

/// Human-readable diagnostic for an infeasible triple, citing the bound.
std::string describe_infeasibility(double kP, double kD, double gamma);

struct FeasibilityPoint {
  double kP = 0.0;
  double kD = 0.0;
  double gamma = 0.0;
  bool feasible = false;
  std::optional<double> k1;
  std::optional<double> k2;
};

struct GridRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Evaluates the conversion on a resolution x resolution grid (inclusive
/// endpoints), kP varying fastest.
std::vector<FeasibilityPoint> feasibility_sweep(const GridRange& kp_range,
                                                const GridRange& kd_range, double gamma,
                                                int resolution);

/// CSV with header kP,kD,gamma,feasible,k1,k2; infeasible rows leave k1/k2 empty.
void write_feasibility_csv(std::ostream& out, std::span<const FeasibilityPoint> points);

}  // namespace abpid
