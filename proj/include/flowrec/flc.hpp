#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

#include "flowrec/errors.hpp"
#include "flowrec/quadrotor.hpp"
#include "flowrec/reference.hpp"

namespace flowrec {

// outer-loop gains: k1/k2 close the yaw loop, k3..k6 weight the jerk,
// acceleration, velocity and position errors of the snap command
struct OuterGains {
  double k1 = 1.0;
  double k2 = 1.0;
  double k3 = 14.0;
  double k4 = 71.0;
  double k5 = 154.0;
  double k6 = 120.0;
};

inline constexpr double kThrustMinFactor = 0.1;    // of mass * gravity
inline constexpr double kDecouplingCondMax = 1e12;

// roots of lambda^4 + k3 lambda^3 + k4 lambda^2 + k5 lambda + k6, the
// closed-loop position error poles
inline std::array<std::complex<double>, 4> position_loop_poles(const OuterGains& g) {
  Eigen::Matrix4d comp = Eigen::Matrix4d::Zero();
  comp(1, 0) = 1.0;
  comp(2, 1) = 1.0;
  comp(3, 2) = 1.0;
  comp(0, 3) = -g.k6;
  comp(1, 3) = -g.k5;
  comp(2, 3) = -g.k4;
  comp(3, 3) = -g.k3;
  const Eigen::EigenSolver<Eigen::Matrix4d> eig(comp);
  std::array<std::complex<double>, 4> poles;
  for (int i = 0; i < 4; ++i) poles[static_cast<std::size_t>(i)] = eig.eigenvalues()[i];
  return poles;
}

// translational derivatives recoverable from the extended state alone
inline Eigen::Vector3d state_acceleration(const ExtendedState& s, const QuadParams& qp) {
  return Eigen::Vector3d(0.0, 0.0, -qp.gravity) +
         (s.thrust / qp.mass) * rotation_matrix(s.euler).col(2);
}

inline Eigen::Vector3d state_jerk(const ExtendedState& s, const QuadParams& qp) {
  const Eigen::Matrix3d R = rotation_matrix(s.euler);
  const Eigen::Vector3d k_b = R.col(2);
  const Eigen::Vector3d omega_in = R * s.omega;
  return (s.thrust_rate / qp.mass) * k_b + (s.thrust / qp.mass) * omega_in.cross(k_b);
}

// time derivative of the euler-rate matrix at the given angles and rates
inline Eigen::Matrix3d euler_rate_matrix_dot(double roll, double pitch, double roll_rate,
                                             double pitch_rate) {
  const double cf = std::cos(roll), sf = std::sin(roll);
  const double ct = std::cos(pitch), st = std::sin(pitch);
  Eigen::Matrix3d Gd;
  Gd << 0.0, 0.0, -ct * pitch_rate,
        0.0, -sf * roll_rate, -st * pitch_rate * sf + ct * cf * roll_rate,
        0.0, -cf * roll_rate, -st * pitch_rate * cf - ct * sf * roll_rate;
  return Gd;
}

// Geometry of the dynamic extension. b1/b2 live in the body frame (they act
// on body torque through the diagonal inertia); o1/o2 assemble the inertial
// snap equation m * snap = o1 * (u_p, eta_ddot) + o2, and o3/o4 map the
// physical input (u_p, torque) to (u_p, eta_ddot).
struct GeometryTerms {
  Eigen::Matrix3d b1;               // euler-rate matrix
  Eigen::Vector3d b2;               // its derivative times the euler rates
  Eigen::Matrix<double, 3, 4> o1;
  Eigen::Vector3d o2;
  Eigen::Matrix4d o3;
  Eigen::Vector4d o4;
};

inline GeometryTerms geometry_terms(const ExtendedState& s, const QuadParams& qp) {
  if (s.thrust < kThrustMinFactor * qp.mass * qp.gravity) {
    throw ThrustSingular("thrust " + std::to_string(s.thrust) +
                         " N too small to decouple the translational loop");
  }
  const double roll = s.euler.x(), pitch = s.euler.y(), yaw = s.euler.z();
  const Eigen::Matrix3d R = rotation_matrix(s.euler);
  const Eigen::Matrix3d G = euler_rate_matrix(roll, pitch);
  const Eigen::Matrix3d Gi = euler_rate_matrix_inverse(roll, pitch);  // may raise GimbalLock
  const Eigen::Vector3d eta_dot = Gi * s.omega;

  GeometryTerms t;
  t.b1 = G;
  t.b2 = euler_rate_matrix_dot(roll, pitch, eta_dot.x(), eta_dot.y()) * eta_dot;

  // inertial-frame axes: body z and y, the pitch axis after the yaw rotation,
  // and the inertial yaw axis
  const Eigen::Vector3d k_b = R.col(2);
  const Eigen::Vector3d j_b = R.col(1);
  const Eigen::Vector3d j_2{-std::sin(yaw), std::cos(yaw), 0.0};
  const Eigen::Vector3d k_1 = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d omega_in = R * s.omega;
  const double p = s.thrust;

  t.o1.col(0) = k_b;
  t.o1.col(1) = -p * j_b;
  t.o1.col(2) = p * j_2.cross(k_b);
  t.o1.col(3) = p * k_1.cross(k_b);

  const Eigen::Vector3d b2_inertial = R * t.b2;
  t.o2 = p * b2_inertial.cross(k_b) + omega_in.cross(omega_in.cross(p * k_b)) +
         2.0 * s.thrust_rate * omega_in.cross(k_b);

  const Eigen::Vector3d inv_inertia = qp.inertia.cwiseInverse();
  t.o3 = Eigen::Matrix4d::Zero();
  t.o3(0, 0) = 1.0;
  t.o3.block<3, 3>(1, 1) = Gi * inv_inertia.asDiagonal();

  const Eigen::Vector3d gyro = s.omega.cross(qp.inertia.cwiseProduct(s.omega));
  t.o4 = Eigen::Vector4d::Zero();
  t.o4.tail<3>() = -Gi * (t.b2 + inv_inertia.cwiseProduct(gyro));
  return t;
}

// snap command from the jerk/acceleration/velocity/position errors
inline Eigen::Vector3d outer_position_law(const ExtendedState& s, const ReferenceSample& ref,
                                          const OuterGains& g, const QuadParams& qp) {
  return g.k3 * (ref.jerk - state_jerk(s, qp)) +
         g.k4 * (ref.acceleration - state_acceleration(s, qp)) +
         g.k5 * (ref.velocity - s.velocity) + g.k6 * (ref.position - s.position);
}

// yaw acceleration command regulating the heading to zero
inline double yaw_law(double yaw, double yaw_rate, const OuterGains& g) {
  return -g.k1 * yaw_rate - g.k2 * yaw;
}

// Invert the decoupling map: find (u_p, torque) so the closed chain realizes
// the commanded snap and yaw acceleration.
inline ExtendedInput solve_extended_input(const Eigen::Vector3d& snap_cmd, double yaw_acc_cmd,
                                          const GeometryTerms& t, const QuadParams& qp) {
  Eigen::Matrix4d A;
  A.topRows<3>() = t.o1 * t.o3;
  A.row(3) = t.o3.row(3);  // e4' * o3
  Eigen::Vector4d rhs;
  rhs.head<3>() = qp.mass * snap_cmd - t.o1 * t.o4 - t.o2;
  rhs[3] = yaw_acc_cmd - t.o4[3];

  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 0.0) || smax / smin > kDecouplingCondMax) {
    throw SingularDecoupling("stacked decoupling matrix condition exceeds 1e12");
  }
  const Eigen::Vector4d u = svd.solve(rhs);
  ExtendedInput out;
  out.thrust_accel = u[0];
  out.torque = u.tail<3>();
  return out;
}

struct ControlOutput {
  ExtendedInput input;  // drives the extended plant
  Wrench wrench;        // current thrust plus commanded torque
  RotorSpeeds rotors;   // realization of that wrench
};

// one synchronous controller evaluation against a reference sample
inline ControlOutput control_step(const ExtendedState& s, const ReferenceSample& ref,
                                  const OuterGains& g, const QuadParams& qp) {
  const GeometryTerms terms = geometry_terms(s, qp);
  const Eigen::Vector3d eta_dot =
      euler_rate_matrix_inverse(s.euler.x(), s.euler.y()) * s.omega;
  const Eigen::Vector3d snap_cmd = outer_position_law(s, ref, g, qp);
  const double yaw_acc_cmd = yaw_law(s.euler.z(), eta_dot.z(), g);

  ControlOutput out;
  out.input = solve_extended_input(snap_cmd, yaw_acc_cmd, terms, qp);
  out.wrench = Wrench{s.thrust, out.input.torque};
  out.rotors = unmix(out.wrench, qp);
  return out;
}

}  // namespace flowrec
