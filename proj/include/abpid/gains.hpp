#pragma once

#include "abpid/core.hpp"

namespace abpid {

/// Diagonal backstepping gains, one entry per axis.
struct BacksteppingGains {
  Vec k1;
  Vec k2;
  Vec gamma;

  int size() const { return static_cast<int>(k1.size()); }
  /// Throws ConfigurationError unless k1, k2 > 0 and gamma >= 0.
  void validate() const;
  /// Axes [first, first + count).
  BacksteppingGains segment(int first, int count) const;
};

/// Diagonal PID gains, one entry per axis.
struct PidGains {
  Vec kP;
  Vec kD;
  Vec kI;

  int size() const { return static_cast<int>(kP.size()); }
};

}  // namespace abpid
