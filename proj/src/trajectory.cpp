#include "abpid/trajectory.hpp"

#include "abpid/core.hpp"

#include <cmath>
#include <numbers>

namespace abpid {

using Eigen::Vector3d;

Smoothstep smoothstep5(double s) {
  if (s <= 0.0) return {0.0, 0.0, 0.0};
  if (s >= 1.0) return {1.0, 0.0, 0.0};
  const double s2 = s * s, s3 = s2 * s;
  return {s3 * (10.0 - 15.0 * s + 6.0 * s2), 30.0 * s2 * (1.0 - 2.0 * s + s2),
          60.0 * s * (1.0 - 3.0 * s + 2.0 * s2)};
}

void PiecewiseMinJerk::move_to(double t0, double t1, const Vector3d& target) {
  if (!(t1 > t0)) throw ContractViolation("PiecewiseMinJerk: segment must have positive length");
  if (!segments_.empty() && t0 < segments_.back().t1) {
    throw ContractViolation("PiecewiseMinJerk: segments must not overlap");
  }
  segments_.push_back({t0, t1, final_position(), target});
}

const Vector3d& PiecewiseMinJerk::final_position() const {
  return segments_.empty() ? start_ : segments_.back().p1;
}

TrajectorySample PiecewiseMinJerk::sample(double t) const {
  TrajectorySample out;
  out.pos = start_;
  for (const auto& seg : segments_) {
    if (t < seg.t0) break;
    const double dur = seg.t1 - seg.t0;
    if (t >= seg.t1) {
      out.pos = seg.p1;
      continue;
    }
    const auto s = smoothstep5((t - seg.t0) / dur);
    const Vector3d delta = seg.p1 - seg.p0;
    out.pos = seg.p0 + s.value * delta;
    out.vel = (s.d1 / dur) * delta;
    out.acc = (s.d2 / (dur * dur)) * delta;
    break;
  }
  return out;
}

void TrajectorySpec::validate() const {
  if (!(altitude > 0.0) || hold < 0.0 || !(takeoff > 0.0) || settle < 0.0 || !(land > 0.0)) {
    throw ConfigurationError("trajectory: invalid timeline");
  }
  switch (kind) {
    case TrajectoryKind::kFigureEight:
      if (!(amplitude_x > 0.0) || !(amplitude_y > 0.0) || !(period > 0.0) || loops < 1 ||
          !(ramp > 0.0) || ramp > loops * period) {
        throw ConfigurationError("trajectory: invalid figure-eight parameters");
      }
      break;
    case TrajectoryKind::kLateralMove:
      if (!(move_duration > 0.0)) throw ConfigurationError("trajectory: invalid move duration");
      break;
    case TrajectoryKind::kHover:
      if (hover_time < 0.0) throw ConfigurationError("trajectory: invalid hover time");
      break;
  }
}

double TrajectorySpec::lateral_phase_duration() const {
  switch (kind) {
    case TrajectoryKind::kFigureEight:
      return loops * period + ramp;
    case TrajectoryKind::kLateralMove:
      return move_duration;
    case TrajectoryKind::kHover:
      return hover_time;
  }
  return 0.0;
}

double TrajectorySpec::total_duration() const {
  return lateral_start() + lateral_phase_duration() + settle + land + hold;
}

namespace {

/// Vertical profile shared by every kind: climb, hold altitude, descend.
PiecewiseMinJerk vertical_profile(const TrajectorySpec& spec) {
  PiecewiseMinJerk z(Vector3d::Zero());
  const double climb_end = spec.hold + spec.takeoff;
  const double descent_start = spec.lateral_start() + spec.lateral_phase_duration() + spec.settle;
  z.move_to(spec.hold, climb_end, Vector3d(0.0, 0.0, spec.altitude));
  z.move_to(descent_start, descent_start + spec.land, Vector3d::Zero());
  return z;
}

}  // namespace

TrajectoryRef figure_eight_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  const double omega = 2.0 * std::numbers::pi / spec.period;
  const double t_start = spec.lateral_start();
  const double ramp = spec.ramp;
  const double cruise = spec.loops * spec.period - ramp;
  const double t_end = t_start + 2.0 * ramp + cruise;
  const PiecewiseMinJerk z = vertical_profile(spec);
  const double ax = spec.amplitude_x, ay = spec.amplitude_y;
  const double total_phase = 2.0 * std::numbers::pi * spec.loops;

  // Phase p(t) with p' rising from 0 to omega through a quintic smoothstep.
  // The integral of smoothstep5 over [0, u] is u^6 - 3u^5 + 2.5u^4.
  const auto ramp_integral = [](double u) {
    return u * u * u * u * (u * u - 3.0 * u + 2.5);
  };
  const auto phase = [=](double t, double& p, double& pd, double& pdd) {
    if (t <= t_start) {
      p = pd = pdd = 0.0;
    } else if (t < t_start + ramp) {
      const double u = (t - t_start) / ramp;
      const auto s = smoothstep5(u);
      p = omega * ramp * ramp_integral(u);
      pd = omega * s.value;
      pdd = omega * s.d1 / ramp;
    } else if (t <= t_end - ramp) {
      p = omega * (0.5 * ramp + (t - t_start - ramp));
      pd = omega;
      pdd = 0.0;
    } else if (t < t_end) {
      const double u = (t_end - t) / ramp;
      const auto s = smoothstep5(u);
      p = total_phase - omega * ramp * ramp_integral(u);
      pd = omega * s.value;
      pdd = -omega * s.d1 / ramp;
    } else {
      p = total_phase;
      pd = pdd = 0.0;
    }
  };

  return [=](double t) {
    TrajectorySample out = z.sample(t);
    double p, pd, pdd;
    phase(t, p, pd, pdd);
    const double s2 = std::sin(2.0 * p), c2 = std::cos(2.0 * p);
    const double s1 = std::sin(p), c1 = std::cos(p);
    out.pos.x() = ax * s2;
    out.vel.x() = 2.0 * ax * c2 * pd;
    out.acc.x() = -4.0 * ax * s2 * pd * pd + 2.0 * ax * c2 * pdd;
    out.pos.y() = ay * s1;
    out.vel.y() = ay * c1 * pd;
    out.acc.y() = -ay * s1 * pd * pd + ay * c1 * pdd;
    return out;
  };
}

TrajectoryRef make_trajectory(const TrajectorySpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case TrajectoryKind::kFigureEight:
      return figure_eight_trajectory(spec);
    case TrajectoryKind::kLateralMove: {
      const double t0 = spec.lateral_start();
      const Vector3d target(spec.move_x, spec.move_y, 0.0);
      const PiecewiseMinJerk z = vertical_profile(spec);
      PiecewiseMinJerk xy(Vector3d::Zero());
      xy.move_to(t0, t0 + spec.move_duration, target);
      return [z, xy](double t) {
        TrajectorySample out = xy.sample(t);
        const TrajectorySample vz = z.sample(t);
        out.pos.z() = vz.pos.z();
        out.vel.z() = vz.vel.z();
        out.acc.z() = vz.acc.z();
        return out;
      };
    }
    case TrajectoryKind::kHover: {
      const PiecewiseMinJerk z = vertical_profile(spec);
      return [z](double t) { return z.sample(t); };
    }
  }
  throw ConfigurationError("unknown trajectory kind");
}

}  // namespace abpid
