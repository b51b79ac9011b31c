#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>

#include "flowrec/errors.hpp"

namespace flowrec {

// cross-configuration airframe; inertia is diagonal in the body frame
struct QuadParams {
  double mass = 0.468;      // kg
  double gravity = 9.81;    // m/s^2
  double arm_length = 0.225;  // m, rotor hub to center
  Eigen::Vector3d inertia{4.856e-3, 4.856e-3, 8.801e-3};  // kg m^2
  double thrust_coeff = 2.98e-6;       // N s^2, rotor speed^2 -> force
  double drag_torque_coeff = 1.14e-7;  // N m s^2, rotor speed^2 -> yaw torque
  double rotor_speed_max = 700.0;      // rad/s, hard safety bound
};

// state of the thrust-extended rigid body: the scalar thrust p and its rate
// ride along so the controller can command the thrust's second derivative
struct ExtendedState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // m, inertial
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // m/s, inertial
  Eigen::Vector3d euler = Eigen::Vector3d::Zero();     // roll, pitch, yaw, rad
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();     // rad/s, body frame
  double thrust = 0.0;       // p, N, along the body z axis
  double thrust_rate = 0.0;  // pdot, N/s
};

// input of the extended plant: thrust second derivative plus body torque
struct ExtendedInput {
  double thrust_accel = 0.0;                         // N/s^2
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // N m, body frame
};

struct Wrench {
  double thrust = 0.0;                               // N
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // N m, body frame
};

struct RotorSpeeds {
  std::array<double, 4> omega{};  // rad/s, each >= 0

  double max() const {
    double m = omega[0];
    for (double w : omega) m = std::max(m, w);
    return m;
  }
  double min() const {
    double m = omega[0];
    for (double w : omega) m = std::min(m, w);
    return m;
  }
};

inline constexpr double kGimbalEpsilon = 1e-2;  // minimum |cos(pitch)|

// body-to-inertial rotation, yaw about z, then pitch about y, then roll about x
inline Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& euler) {
  const double cf = std::cos(euler.x()), sf = std::sin(euler.x());
  const double ct = std::cos(euler.y()), st = std::sin(euler.y());
  const double cp = std::cos(euler.z()), sp = std::sin(euler.z());
  Eigen::Matrix3d R;
  R << ct * cp, sf * st * cp - cf * sp, cf * st * cp + sf * sp,
       ct * sp, sf * st * sp + cf * cp, cf * st * sp - sf * cp,
       -st,     sf * ct,               cf * ct;
  return R;
}

// maps euler angle rates to body angular velocity
inline Eigen::Matrix3d euler_rate_matrix(double roll, double pitch) {
  const double cf = std::cos(roll), sf = std::sin(roll);
  const double ct = std::cos(pitch), st = std::sin(pitch);
  Eigen::Matrix3d G;
  G << 1.0, 0.0, -st,
       0.0, cf, ct * sf,
       0.0, -sf, cf * ct;
  return G;
}

// inverse map; degenerates as the pitch approaches +-pi/2
inline Eigen::Matrix3d euler_rate_matrix_inverse(double roll, double pitch) {
  const double cf = std::cos(roll), sf = std::sin(roll);
  const double ct = std::cos(pitch), st = std::sin(pitch);
  if (std::abs(ct) < kGimbalEpsilon) {
    throw GimbalLock("pitch within " + std::to_string(kGimbalEpsilon) + " of gimbal lock");
  }
  Eigen::Matrix3d Gi;
  Gi << 1.0, sf * st / ct, cf * st / ct,
        0.0, cf, -sf,
        0.0, sf / ct, cf / ct;
  return Gi;
}

// rows: total thrust, roll torque, pitch torque, yaw torque; columns: rotor 1..4
// rotors 1 and 3 on the body x arms spinning one way, 2 and 4 on y the other
inline Eigen::Matrix4d mixing_matrix(const QuadParams& qp) {
  const double b = qp.thrust_coeff;
  const double bl = qp.thrust_coeff * qp.arm_length;
  const double k = qp.drag_torque_coeff;
  Eigen::Matrix4d M;
  M << b, b, b, b,
       0.0, -bl, 0.0, bl,
       -bl, 0.0, bl, 0.0,
       -k, k, -k, k;
  return M;
}

inline Wrench mix(const RotorSpeeds& speeds, const QuadParams& qp) {
  Eigen::Vector4d sq;
  for (int i = 0; i < 4; ++i) sq[i] = speeds.omega[static_cast<std::size_t>(i)] * speeds.omega[static_cast<std::size_t>(i)];
  const Eigen::Vector4d u = mixing_matrix(qp) * sq;
  return {u[0], {u[1], u[2], u[3]}};
}

// invert the mixing map; fails when the wrench needs a negative squared speed
inline RotorSpeeds unmix(const Wrench& w, const QuadParams& qp) {
  const double b4 = 0.25 / qp.thrust_coeff;
  const double bl2 = 0.5 / (qp.thrust_coeff * qp.arm_length);
  const double k4 = 0.25 / qp.drag_torque_coeff;
  const double tp = w.thrust * b4;
  const double tf = w.torque.x() * bl2;
  const double tt = w.torque.y() * bl2;
  const double ty = w.torque.z() * k4;
  const std::array<double, 4> sq{tp - tt - ty, tp - tf + ty, tp + tt - ty, tp + tf + ty};
  RotorSpeeds out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (sq[i] < 0.0) {
      throw InfeasibleWrench("rotor " + std::to_string(i + 1) +
                             " would need a negative squared speed");
    }
    out.omega[i] = std::sqrt(sq[i]);
  }
  return out;
}

// time derivative of the extended state; the returned struct holds d/dt of
// each field of the input state
inline ExtendedState dynamics(const ExtendedState& s, const ExtendedInput& u,
                              const QuadParams& qp) {
  ExtendedState d;
  d.position = s.velocity;
  const Eigen::Matrix3d R = rotation_matrix(s.euler);
  d.velocity = Eigen::Vector3d(0.0, 0.0, -qp.gravity) + (s.thrust / qp.mass) * R.col(2);
  d.euler = euler_rate_matrix_inverse(s.euler.x(), s.euler.y()) * s.omega;
  const Eigen::Vector3d J_omega = qp.inertia.cwiseProduct(s.omega);
  d.omega = (u.torque - s.omega.cross(J_omega)).cwiseQuotient(qp.inertia);
  d.thrust = s.thrust_rate;
  d.thrust_rate = u.thrust_accel;
  return d;
}

namespace detail {

inline ExtendedState axpy(const ExtendedState& s, const ExtendedState& d, double h) {
  ExtendedState r;
  r.position = s.position + h * d.position;
  r.velocity = s.velocity + h * d.velocity;
  r.euler = s.euler + h * d.euler;
  r.omega = s.omega + h * d.omega;
  r.thrust = s.thrust + h * d.thrust;
  r.thrust_rate = s.thrust_rate + h * d.thrust_rate;
  return r;
}

}  // namespace detail

// one classical fourth-order step with the input held constant
inline ExtendedState step_rk4(const ExtendedState& s, const ExtendedInput& u, double dt,
                              const QuadParams& qp) {
  const ExtendedState k1 = dynamics(s, u, qp);
  const ExtendedState k2 = dynamics(detail::axpy(s, k1, 0.5 * dt), u, qp);
  const ExtendedState k3 = dynamics(detail::axpy(s, k2, 0.5 * dt), u, qp);
  const ExtendedState k4 = dynamics(detail::axpy(s, k3, dt), u, qp);
  ExtendedState sum = detail::axpy(k1, k2, 2.0);
  sum = detail::axpy(sum, k3, 2.0);
  sum = detail::axpy(sum, k4, 1.0);
  return detail::axpy(s, sum, dt / 6.0);
}

}  // namespace flowrec
