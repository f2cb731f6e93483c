#pragma once

#include <Eigen/Core>

#include "mavctl/geometry.hpp"

namespace mavctl {

/// World-frame kinematic state: position, velocity, attitude.
struct StateVector {
  Vec3 p{Vec3::Zero()};        // m
  Vec3 v{Vec3::Zero()};        // m/s
  EulerAngles attitude;

  bool all_finite() const;
};

/// Time derivative of StateVector (same shape).
struct StateDerivative {
  Vec3 p_dot{Vec3::Zero()};
  Vec3 v_dot{Vec3::Zero()};
  EulerAngles attitude_dot;
};

/// Physical control input: attitude commands (rad), collective thrust (N),
/// heading rate command (rad/s).
struct ControlInput {
  double u_phi{0.0};
  double u_theta{0.0};
  double u_thrust{0.0};
  double u_psi_dot{0.0};
};

/// Rigid-body and inner-loop model parameters.
struct VehicleParams {
  double mass{3.62};              // kg
  double k_drag{0.01};            // thrust-proportional drag coefficient
  double gravity{9.81};           // m/s^2
  double tau_phi{0.472};          // s, roll time constant
  double tau_theta{0.472};        // s, pitch time constant
  double k_phi{1.673};            // roll DC gain
  double k_theta{1.575};          // pitch DC gain
  double thrust_max{65.0};        // N
  double attitude_limit{M_PI / 6.0};  // rad, command magnitude bound

  void validate() const;  // throws std::invalid_argument on violation
};

/// Continuous dynamics:
///   p_dot = v
///   v_dot = (R(att)*[0,0,uT] - uT*diag(kd,kd,0)*v + f_ext)/m + [0,0,-g]
///   phi_dot = (k_phi*u_phi - phi)/tau_phi   (pitch analogous)
///   psi_dot = u_psi_dot
StateDerivative mav_dynamics(const StateVector& x, const ControlInput& u,
                             const VehicleParams& params, const Vec3& f_ext);

/// Analytic Jacobians of mav_dynamics. State order (p, v, phi, theta, psi),
/// input order (u_phi, u_theta, u_thrust, u_psi_dot).
void mav_dynamics_jacobians(const StateVector& x, const ControlInput& u,
                            const VehicleParams& params, const Vec3& f_ext,
                            Eigen::Matrix<double, 9, 9>& df_dx,
                            Eigen::Matrix<double, 9, 4>& df_du);

/// Classical RK4 step with the input held constant over [0, dt].
StateVector rk4_step(const StateVector& x, const ControlInput& u,
                     const VehicleParams& params, const Vec3& f_ext, double dt);

/// Input holding the vehicle stationary against gravity and f_ext at the
/// given heading. Thrust balances the vertical residual; roll/pitch solve
/// the lateral force balance; u_psi_dot = 0.
/// Throws std::domain_error when the required thrust leaves [0, thrust_max]
/// or the required attitude commands exceed the attitude limit.
ControlInput hover_input(const VehicleParams& params, const Vec3& f_ext,
                         double yaw = 0.0);

/// State consistent with hover_input: at rest, attitude such that
/// mav_dynamics(hover_state, hover_input) == 0.
StateVector hover_state(const VehicleParams& params, const Vec3& f_ext,
                        double yaw = 0.0, const Vec3& position = Vec3::Zero());

}  // namespace mavctl
