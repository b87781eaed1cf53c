#include "abpid/quadrotor.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace abpid::quad {

namespace {

constexpr double kArcsinLimit = 1.0 - 1e-9;

void check_attitude(const Vec3& eta) {
  const double limit = std::numbers::pi / 2.0 - kAttitudeMargin;
  if (!eta.allFinite() || std::abs(eta[0]) >= limit || std::abs(eta[1]) >= limit) {
    throw SimulationFault(fmt::format("attitude singularity: roll={:.4f} pitch={:.4f} rad",
                                      eta[0], eta[1]));
  }
}

std::vector<Bounds1D> theta_bounds(double limit) {
  return {Bounds1D::symmetric(limit), Bounds1D::symmetric(limit)};
}

Mat3 attitude_g_hat(const QuadrotorParams& nominal, const Vec3& eta) {
  const Mat3 jr = nominal.inertia * euler_rate_matrix(eta);
  return jr.inverse();
}

}  // namespace

void QuadrotorParams::validate() const {
  if (!(mass > 0.0) || !(arm_length > 0.0) || !(kt > 0.0) || !(kq > 0.0) ||
      !(omega_sq_max > 0.0)) {
    throw ConfigurationError("quadrotor: mass, arm length, rotor constants must be positive");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigurationError("quadrotor: inertia must be positive definite");
  }
}

Vec12 QuadState::pack() const {
  Vec12 x;
  x << xi, eta, xi_dot, eta_dot;
  return x;
}

QuadState QuadState::unpack(const Vec12& x, const Vec4& omega) {
  QuadState s;
  s.xi = x.segment<3>(0);
  s.eta = x.segment<3>(3);
  s.xi_dot = x.segment<3>(6);
  s.eta_dot = x.segment<3>(9);
  s.omega = omega;
  return s;
}

Vec3 WindGust::drag_force(double speed, const Vec3& direction, double rho, double cd_area) {
  const double n = direction.norm();
  if (n == 0.0) return Vec3::Zero();
  return 0.5 * rho * cd_area * speed * speed * direction / n;
}

double WindGust::envelope(double t) const {
  const double local = t - onset;
  if (local < 0.0 || local >= duration) return 0.0;
  if (profile == GustProfile::kStep || rise_time <= 0.0) return 1.0;
  double e = std::min(1.0, local / rise_time);
  // Symmetric ramp-down over the last rise_time of a finite gust.
  if (std::isfinite(duration)) e = std::min(e, std::max(0.0, (duration - local) / rise_time));
  return e;
}

Mat3 rotation_body_to_world(const Vec3& eta) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(eta[2], Vec3::UnitZ()) * AngleAxisd(eta[0], Vec3::UnitX()) *
          AngleAxisd(eta[1], Vec3::UnitY()))
      .toRotationMatrix();
}

Mat3 euler_rate_matrix(const Vec3& eta) {
  const double c1 = std::cos(eta[0]), s1 = std::sin(eta[0]);
  const double c2 = std::cos(eta[1]), s2 = std::sin(eta[1]);
  Mat3 r;
  r << c2, 0.0, -c1 * s2,
       0.0, 1.0, s1,
       s2, 0.0, c1 * c2;
  return r;
}

Vec3 thrust_offset_moment(const Vec3& com_offset, const Vec3& force_body) {
  return force_body.cross(com_offset);
}

Vec12 dynamics(const QuadState& state, const QuadrotorParams& params, const Vec3& force_body,
               const Vec3& torque_body, const Disturbance& delta) {
  check_attitude(state.eta);
  const Vec3 gravity(0.0, 0.0, params.gravity);
  const Vec3 xi_ddot =
      -gravity + (rotation_body_to_world(state.eta) * force_body + delta.force) / params.mass;
  const Mat3 jr = params.inertia * euler_rate_matrix(state.eta);
  const Vec3 moment =
      torque_body + thrust_offset_moment(params.com_offset, force_body) + delta.torque;
  const Vec3 eta_ddot = jr.partialPivLu().solve(moment);

  Vec12 dx;
  dx << state.xi_dot, state.eta_dot, xi_ddot, eta_ddot;
  if (!dx.allFinite()) throw SimulationFault("non-finite state derivative");
  return dx;
}

Mat32 regressor_phi2(double thrust, const Vec3& eta, double jxx0, double jyy0) {
  const double c1 = std::cos(eta[0]);
  if (std::abs(c1) < 1e-9) {
    throw SingularityError("regressor_phi2: roll at +-pi/2");
  }
  const double t1 = std::tan(eta[0]);
  const double c2 = std::cos(eta[1]), s2 = std::sin(eta[1]);
  Mat32 phi;
  phi << 0.0, -thrust * c2 / jxx0,
         thrust / jyy0, -thrust * t1 * s2 / jxx0,
         0.0, thrust * s2 / (c1 * jxx0);
  return phi;
}

Vec3 world_force(const Vec3& eta, double thrust) {
  const double s1 = std::sin(eta[0]), c1 = std::cos(eta[0]);
  const double s2 = std::sin(eta[1]), c2 = std::cos(eta[1]);
  const double s3 = std::sin(eta[2]), c3 = std::cos(eta[2]);
  return Vec3(s1 * c2 * s3 + s2 * c3, s2 * s3 - s1 * c2 * c3, c1 * c2) * thrust;
}

ThrustAttitude thrust_and_attitude_from_u(const Vec3& u, double yaw) {
  if (!u.allFinite() || !std::isfinite(yaw)) {
    throw ContractViolation("thrust_and_attitude_from_u: non-finite input");
  }
  ThrustAttitude out;
  out.thrust = u.norm();
  if (out.thrust == 0.0) {
    throw DomainError("thrust_and_attitude_from_u: zero thrust leaves attitude undefined");
  }
  if (!(u[2] > 0.0)) {
    throw DomainError("thrust_and_attitude_from_u: vertical force must be positive");
  }
  const double s3 = std::sin(yaw), c3 = std::cos(yaw);
  out.roll = std::atan((u[0] * s3 - u[1] * c3) / u[2]);
  double arg = (u[0] * c3 + u[1] * s3) / out.thrust;
  if (std::abs(arg) > kArcsinLimit) {
    arg = std::copysign(kArcsinLimit, arg);
    out.clamped = true;
  }
  out.pitch = std::asin(arg);
  return out;
}

RotorCommand rotor_mixing(double thrust, const Vec3& torque, const QuadrotorParams& params) {
  const double sum = thrust / params.kt;
  const double roll_diff = torque[0] / (params.kt * params.arm_length);   // w3 - w4
  const double pitch_diff = torque[1] / (params.kt * params.arm_length);  // w1 - w2
  const double yaw_diff = torque[2] / params.kq;  // (w1 + w2) - (w3 + w4)
  const double pair12 = 0.5 * (sum + yaw_diff);
  const double pair34 = 0.5 * (sum - yaw_diff);
  RotorCommand cmd;
  cmd.omega_sq << 0.5 * (pair12 + pitch_diff), 0.5 * (pair12 - pitch_diff),
      0.5 * (pair34 + roll_diff), 0.5 * (pair34 - roll_diff);
  for (int i = 0; i < 4; ++i) {
    const double clipped = std::clamp(cmd.omega_sq[i], 0.0, params.omega_sq_max);
    if (clipped != cmd.omega_sq[i]) cmd.saturated = true;
    cmd.omega_sq[i] = clipped;
  }
  return cmd;
}

RotorWrench rotor_wrench(const Vec4& w, const QuadrotorParams& params) {
  RotorWrench out;
  out.thrust = params.kt * w.sum();
  out.torque = Vec3(params.kt * params.arm_length * (w[2] - w[3]),
                    params.kt * params.arm_length * (w[0] - w[1]),
                    params.kq * (w[0] + w[1] - w[2] - w[3]));
  return out;
}

Vec4 motor_lag(const Vec4& omega_cmd, const Vec4& omega_actual, double tau_m, double dt) {
  if (!(tau_m >= 0.0)) throw ContractViolation("motor_lag: tau_m must be non-negative");
  if (tau_m == 0.0) return omega_cmd;
  const double a = 1.0 - std::exp(-dt / tau_m);
  return omega_actual + a * (omega_cmd - omega_actual);
}

QuadrotorParams composite_inertia(const QuadrotorParams& params, const Payload& payload) {
  if (!(payload.mass >= 0.0)) {
    throw ContractViolation("composite_inertia: payload mass must be non-negative");
  }
  if (payload.mass == 0.0) return params;
  QuadrotorParams out = params;
  const double mp = payload.mass;
  const Vec3& rp = payload.position;
  out.mass = params.mass + mp;
  out.com_offset = (params.mass * params.com_offset + mp * rp) / out.mass;
  out.inertia = params.inertia + mp * (rp.squaredNorm() * Mat3::Identity() - rp * rp.transpose());
  return out;
}

SystemModel translational_model(const QuadrotorParams& nominal, double theta_limit,
                                double delta_bar) {
  SystemModel m;
  m.n = 3;
  m.l = 2;
  const double g = nominal.gravity;
  m.f = [g](const StatePoint&) { return Vec(Vec3(0.0, 0.0, -g)); };
  m.phi = [](const StatePoint&) { return Mat(Mat::Zero(3, 2)); };
  const double inv_mass = 1.0 / nominal.mass;
  m.g_hat = [inv_mass](const StatePoint&) { return Mat(inv_mass * Mat::Identity(3, 3)); };
  m.theta_bounds = theta_bounds(theta_limit);
  // Payloads up to half the vehicle mass.
  m.g_min = (inv_mass / 1.5) * Mat::Identity(3, 3);
  m.g_max = inv_mass * Mat::Identity(3, 3);
  m.delta_bar = delta_bar;
  return m;
}

SystemModel attitude_model(const QuadrotorParams& nominal, double thrust, double theta_limit,
                           double delta_bar) {
  SystemModel m;
  m.n = 3;
  m.l = 2;
  m.f = [](const StatePoint&) { return Vec(Vec::Zero(3)); };
  const double jxx = nominal.inertia(0, 0), jyy = nominal.inertia(1, 1);
  m.phi = [thrust, jxx, jyy](const StatePoint& p) {
    return Mat(regressor_phi2(thrust, Vec3(p.x1.head<3>()), jxx, jyy));
  };
  m.g_hat = [nominal](const StatePoint& p) {
    return Mat(attitude_g_hat(nominal, Vec3(p.x1.head<3>())));
  };
  m.theta_bounds = theta_bounds(theta_limit);
  const Mat3 level = nominal.inertia.inverse();
  m.g_min = 0.8 * level;
  m.g_max = 1.2 * level;
  m.delta_bar = delta_bar;
  return m;
}

SystemModel full_model(const QuadrotorParams& nominal, double thrust, double theta_limit) {
  SystemModel m;
  m.n = 6;
  m.l = 2;
  const double g = nominal.gravity;
  m.f = [g](const StatePoint&) {
    Vec f = Vec::Zero(6);
    f[2] = -g;
    return f;
  };
  const double jxx = nominal.inertia(0, 0), jyy = nominal.inertia(1, 1);
  m.phi = [thrust, jxx, jyy](const StatePoint& p) {
    Mat phi = Mat::Zero(6, 2);
    phi.bottomRows(3) = regressor_phi2(thrust, Vec3(p.x1.segment<3>(3)), jxx, jyy);
    return phi;
  };
  m.g_hat = [nominal](const StatePoint& p) {
    Mat gm = Mat::Zero(6, 6);
    gm.topLeftCorner(3, 3) = Mat3::Identity() / nominal.mass;
    gm.bottomRightCorner(3, 3) = attitude_g_hat(nominal, Vec3(p.x1.segment<3>(3)));
    return gm;
  };
  m.theta_bounds = theta_bounds(theta_limit);
  m.g_min = Mat::Zero(6, 6);
  m.g_max = Mat::Zero(6, 6);
  m.delta_bar = 0.0;
  return m;
}

}  // namespace abpid::quad
