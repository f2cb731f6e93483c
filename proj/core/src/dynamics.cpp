#include "mavctl/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace mavctl {

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

// Third column of R(roll, pitch, yaw): thrust direction in the world frame.
Vec3 thrust_axis(const EulerAngles& a) {
  const double cr = std::cos(a.roll), sr = std::sin(a.roll);
  const double cp = std::cos(a.pitch), sp = std::sin(a.pitch);
  const double cy = std::cos(a.yaw), sy = std::sin(a.yaw);
  return {cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr};
}

}  // namespace

bool StateVector::all_finite() const {
  return finite(p) && finite(v) && std::isfinite(attitude.roll) &&
         std::isfinite(attitude.pitch) && std::isfinite(attitude.yaw);
}

void VehicleParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("vehicle mass must be positive");
  if (!(gravity > 0.0)) throw std::invalid_argument("gravity must be positive");
  if (!(tau_phi > 0.0 && tau_theta > 0.0))
    throw std::invalid_argument("attitude time constants must be positive");
  if (!(k_phi > 0.0 && k_theta > 0.0))
    throw std::invalid_argument("attitude gains must be positive");
  if (!(thrust_max > mass * gravity))
    throw std::invalid_argument("thrust_max must exceed hover thrust");
}

StateDerivative mav_dynamics(const StateVector& x, const ControlInput& u,
                             const VehicleParams& params, const Vec3& f_ext) {
  StateDerivative d;
  d.p_dot = x.v;

  const Vec3 thrust_world = u.u_thrust * thrust_axis(x.attitude);
  const Vec3 drag(u.u_thrust * params.k_drag * x.v.x(),
                  u.u_thrust * params.k_drag * x.v.y(), 0.0);
  d.v_dot = (thrust_world - drag + f_ext) / params.mass;
  d.v_dot.z() -= params.gravity;

  d.attitude_dot.roll = (params.k_phi * u.u_phi - x.attitude.roll) / params.tau_phi;
  d.attitude_dot.pitch =
      (params.k_theta * u.u_theta - x.attitude.pitch) / params.tau_theta;
  d.attitude_dot.yaw = u.u_psi_dot;
  return d;
}

void mav_dynamics_jacobians(const StateVector& x, const ControlInput& u,
                            const VehicleParams& params, const Vec3& f_ext,
                            Eigen::Matrix<double, 9, 9>& df_dx,
                            Eigen::Matrix<double, 9, 4>& df_du) {
  (void)f_ext;  // dynamics are affine in f_ext
  df_dx.setZero();
  df_du.setZero();

  const double cr = std::cos(x.attitude.roll), sr = std::sin(x.attitude.roll);
  const double cp = std::cos(x.attitude.pitch), sp = std::sin(x.attitude.pitch);
  const double cy = std::cos(x.attitude.yaw), sy = std::sin(x.attitude.yaw);
  const double m = params.mass;
  const double ut = u.u_thrust;

  // dp/dt = v
  df_dx.block<3, 3>(0, 3).setIdentity();

  // dv/dt rows: drag acts on horizontal velocity only.
  df_dx(3, 3) = -ut * params.k_drag / m;
  df_dx(4, 4) = -ut * params.k_drag / m;

  const Vec3 axis = thrust_axis(x.attitude);
  const Vec3 daxis_droll(-cy * sp * sr + sy * cr, -sy * sp * sr - cy * cr, -cp * sr);
  const Vec3 daxis_dpitch(cy * cp * cr, sy * cp * cr, -sp * cr);
  const Vec3 daxis_dyaw(-sy * sp * cr + cy * sr, cy * sp * cr + sy * sr, 0.0);
  df_dx.block<3, 1>(3, 6) = (ut / m) * daxis_droll;
  df_dx.block<3, 1>(3, 7) = (ut / m) * daxis_dpitch;
  df_dx.block<3, 1>(3, 8) = (ut / m) * daxis_dyaw;

  // Attitude rows.
  df_dx(6, 6) = -1.0 / params.tau_phi;
  df_dx(7, 7) = -1.0 / params.tau_theta;

  // Input columns.
  df_du(6, 0) = params.k_phi / params.tau_phi;
  df_du(7, 1) = params.k_theta / params.tau_theta;
  df_du.block<3, 1>(3, 2) =
      (axis - Vec3(params.k_drag * x.v.x(), params.k_drag * x.v.y(), 0.0)) / m;
  df_du(8, 3) = 1.0;
}

namespace {

StateVector advance(const StateVector& x, const StateDerivative& d, double h) {
  StateVector out;
  out.p = x.p + h * d.p_dot;
  out.v = x.v + h * d.v_dot;
  out.attitude.roll = x.attitude.roll + h * d.attitude_dot.roll;
  out.attitude.pitch = x.attitude.pitch + h * d.attitude_dot.pitch;
  out.attitude.yaw = x.attitude.yaw + h * d.attitude_dot.yaw;
  return out;
}

}  // namespace

StateVector rk4_step(const StateVector& x, const ControlInput& u,
                     const VehicleParams& params, const Vec3& f_ext, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const StateDerivative k1 = mav_dynamics(x, u, params, f_ext);
  const StateDerivative k2 = mav_dynamics(advance(x, k1, dt / 2), u, params, f_ext);
  const StateDerivative k3 = mav_dynamics(advance(x, k2, dt / 2), u, params, f_ext);
  const StateDerivative k4 = mav_dynamics(advance(x, k3, dt), u, params, f_ext);

  StateVector out;
  out.p = x.p + dt / 6.0 * (k1.p_dot + 2 * k2.p_dot + 2 * k3.p_dot + k4.p_dot);
  out.v = x.v + dt / 6.0 * (k1.v_dot + 2 * k2.v_dot + 2 * k3.v_dot + k4.v_dot);
  out.attitude.roll =
      x.attitude.roll + dt / 6.0 *
                            (k1.attitude_dot.roll + 2 * k2.attitude_dot.roll +
                             2 * k3.attitude_dot.roll + k4.attitude_dot.roll);
  out.attitude.pitch =
      x.attitude.pitch + dt / 6.0 *
                             (k1.attitude_dot.pitch + 2 * k2.attitude_dot.pitch +
                              2 * k3.attitude_dot.pitch + k4.attitude_dot.pitch);
  out.attitude.yaw =
      x.attitude.yaw + dt / 6.0 *
                           (k1.attitude_dot.yaw + 2 * k2.attitude_dot.yaw +
                            2 * k3.attitude_dot.yaw + k4.attitude_dot.yaw);
  return out;
}

namespace {

// Attitude whose thrust axis points along the unit vector n at the given yaw.
EulerAngles attitude_for_thrust_axis(const Vec3& n, double yaw) {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  EulerAngles a;
  a.roll = std::asin(std::clamp(n.x() * sy - n.y() * cy, -1.0, 1.0));
  a.pitch = std::atan2(n.x() * cy + n.y() * sy, n.z());
  a.yaw = yaw;
  return a;
}

}  // namespace

ControlInput hover_input(const VehicleParams& params, const Vec3& f_ext,
                         double yaw) {
  const Vec3 required(-f_ext.x(), -f_ext.y(),
                      params.mass * params.gravity - f_ext.z());
  if (!(required.z() > 0.0))
    throw std::domain_error("hover_input: external force exceeds weight");

  const double thrust = required.norm();
  if (thrust > params.thrust_max)
    throw std::domain_error("hover_input: required thrust exceeds thrust_max");

  const EulerAngles att = attitude_for_thrust_axis(required / thrust, yaw);
  ControlInput u;
  u.u_phi = att.roll / params.k_phi;
  u.u_theta = att.pitch / params.k_theta;
  u.u_thrust = thrust;
  u.u_psi_dot = 0.0;
  if (std::abs(u.u_phi) > params.attitude_limit ||
      std::abs(u.u_theta) > params.attitude_limit)
    throw std::domain_error("hover_input: attitude command exceeds limit");
  return u;
}

StateVector hover_state(const VehicleParams& params, const Vec3& f_ext,
                        double yaw, const Vec3& position) {
  const ControlInput u = hover_input(params, f_ext, yaw);
  StateVector x;
  x.p = position;
  x.v.setZero();
  x.attitude.roll = params.k_phi * u.u_phi;
  x.attitude.pitch = params.k_theta * u.u_theta;
  x.attitude.yaw = yaw;
  return x;
}

}  // namespace mavctl
