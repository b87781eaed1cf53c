#pragma once

#include "abpid/core.hpp"

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>

namespace abpid::quad {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Plant integration cannot continue (attitude singularity, non-finite state).
class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Roll/pitch must stay this far inside +-pi/2.
inline constexpr double kAttitudeMargin = 0.1;

struct QuadrotorParams {
  double mass = 1.76;                                    // kg
  Mat3 inertia = Vec3(0.03, 0.03, 0.04).asDiagonal();    // kg m^2, about the body origin
  double arm_length = 0.2;                               // m
  double kt = 13.0;                                      // N per unit omega^2
  double kq = 0.4;                                       // N m per unit omega^2
  Vec3 com_offset = Vec3::Zero();                        // CoM in the body frame, m
  double gravity = 9.81;                                 // m/s^2
  double omega_sq_max = 1.0;                             // per-rotor ceiling

  /// Quanser QBall-2 constants.
  static QuadrotorParams qball2() { return {}; }
  void validate() const;
};

struct QuadState {
  Vec3 xi = Vec3::Zero();       // position, world frame
  Vec3 eta = Vec3::Zero();      // roll, pitch, yaw
  Vec3 xi_dot = Vec3::Zero();
  Vec3 eta_dot = Vec3::Zero();  // Euler-angle rates
  Vec4 omega = Vec4::Zero();    // normalized rotor speeds

  Vec12 pack() const;
  static QuadState unpack(const Vec12& x, const Vec4& omega);
};

struct Payload {
  double mass = 0.0;
  Vec3 position = Vec3::Zero();  // body frame
  bool attached = false;
  double attach_time = 0.0;
  double detach_time = std::numeric_limits<double>::infinity();

  bool active_at(double t) const {
    return attached && mass > 0.0 && t >= attach_time && t < detach_time;
  }
};

enum class GustProfile { kStep, kRamped };

struct WindGust {
  double onset = 0.0;
  Vec3 force = Vec3::Zero();   // world frame, N
  Vec3 torque = Vec3::Zero();  // body frame, N m
  GustProfile profile = GustProfile::kStep;
  double rise_time = 0.0;
  double duration = std::numeric_limits<double>::infinity();

  /// Steady force of a gust at `speed` m/s: 0.5 rho CdA v^2 along `direction`.
  static Vec3 drag_force(double speed, const Vec3& direction, double rho = 1.225,
                         double cd_area = 0.15);
  /// Fraction in [0, 1] of the full gust acting at t.
  double envelope(double t) const;
  bool active_at(double t) const { return envelope(t) > 0.0; }
};

struct Disturbance {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

/// Rotation taking body vectors to the world frame (yaw, then roll, then pitch).
Mat3 rotation_body_to_world(const Vec3& eta);

/// Maps Euler-angle rates to body angular velocity.
Mat3 euler_rate_matrix(const Vec3& eta);

/// Moment about the CoM of a body force applied at the body origin.
Vec3 thrust_offset_moment(const Vec3& com_offset, const Vec3& force_body);

/// Derivative of the packed 12-state. Throws SimulationFault near the
/// roll/pitch singularity.
Vec12 dynamics(const QuadState& state, const QuadrotorParams& params, const Vec3& force_body,
               const Vec3& torque_body, const Disturbance& delta);

/// Regressor multiplying theta = [r_x, r_y] in the rotational dynamics.
Mat32 regressor_phi2(double thrust, const Vec3& eta, double jxx0, double jyy0);

/// World-frame thrust vector for total thrust `thrust` at attitude `eta`.
Vec3 world_force(const Vec3& eta, double thrust);

struct ThrustAttitude {
  double thrust = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  bool clamped = false;  // arcsin argument was clamped
};

/// Total thrust and roll/pitch that realize the world force `u` at yaw `yaw`.
ThrustAttitude thrust_and_attitude_from_u(const Vec3& u, double yaw);

struct RotorCommand {
  Vec4 omega_sq = Vec4::Zero();
  bool saturated = false;
};

struct RotorWrench {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();
};

/// Squared rotor speeds producing (thrust, torque), clipped to
/// [0, omega_sq_max] with `saturated` set when clipping occurred.
RotorCommand rotor_mixing(double thrust, const Vec3& torque, const QuadrotorParams& params);

/// Thrust and torques from squared rotor speeds.
RotorWrench rotor_wrench(const Vec4& omega_sq, const QuadrotorParams& params);

/// Exact discretization of a first-order lag toward the command.
Vec4 motor_lag(const Vec4& omega_cmd, const Vec4& omega_actual, double tau_m, double dt);

/// Vehicle plus point-mass payload: total mass, shifted CoM and inertia
/// augmented with the payload's parallel-axis term about the body origin.
QuadrotorParams composite_inertia(const QuadrotorParams& params, const Payload& payload);

/// Outer (translational) loop as a SystemModel: f = [0,0,-g], phi = 0
/// (3 x 2, shares theta with the attitude loop), g_hat = I / m_nominal.
SystemModel translational_model(const QuadrotorParams& nominal, double theta_limit,
                                double delta_bar);

/// Inner (attitude) loop: f = 0, phi = phi2(thrust), g_hat = (J0 R_r)^-1.
SystemModel attitude_model(const QuadrotorParams& nominal, double thrust, double theta_limit,
                           double delta_bar);

/// All six axes stacked with U = [F_W; tau_B].
SystemModel full_model(const QuadrotorParams& nominal, double thrust, double theta_limit);

}  // namespace abpid::quad
