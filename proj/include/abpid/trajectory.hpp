#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace abpid {

/// Reference position and yaw with analytic first and second derivatives.
struct TrajectorySample {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
  double yaw_acc = 0.0;
};

using TrajectoryRef = std::function<TrajectorySample(double)>;

/// Quintic 10s^3 - 15s^4 + 6s^5 on [0, 1] with its first two derivatives.
struct Smoothstep {
  double value;
  double d1;
  double d2;
};
Smoothstep smoothstep5(double s);

/// Rest-to-rest quintic moves between waypoints, holding position between
/// segments. Segments must be added in time order.
class PiecewiseMinJerk {
 public:
  explicit PiecewiseMinJerk(Eigen::Vector3d start) : start_(std::move(start)) {}

  void move_to(double t0, double t1, const Eigen::Vector3d& target);
  TrajectorySample sample(double t) const;
  const Eigen::Vector3d& final_position() const;

 private:
  struct Segment {
    double t0;
    double t1;
    Eigen::Vector3d p0;
    Eigen::Vector3d p1;
  };
  Eigen::Vector3d start_;
  std::vector<Segment> segments_;
};

enum class TrajectoryKind { kHover, kFigureEight, kLateralMove };

/// Takeoff, a lateral phase and landing. Timeline: ground hold, climb,
/// settle, lateral phase, settle, descent, ground hold.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kFigureEight;
  double altitude = 1.0;
  double hold = 1.0;
  double takeoff = 3.0;
  double settle = 1.0;
  double land = 3.0;
  // figure eight: x = ax sin(2 p), y = ay sin(p), p ramped smoothly to 2 pi / period
  double amplitude_x = 1.0;
  double amplitude_y = 0.5;
  double period = 12.0;
  int loops = 3;
  double ramp = 2.0;
  // lateral move
  double move_x = 1.0;
  double move_y = 0.5;
  double move_duration = 8.0;
  // hover
  double hover_time = 10.0;

  void validate() const;
  double lateral_phase_duration() const;
  double lateral_start() const { return hold + takeoff + settle; }
  double total_duration() const;
};

/// Lemniscate-style loops with C2 blends into and out of the lateral phase;
/// the lateral path closes after `loops` periods.
TrajectoryRef figure_eight_trajectory(const TrajectorySpec& spec);

TrajectoryRef make_trajectory(const TrajectorySpec& spec);

}  // namespace abpid
