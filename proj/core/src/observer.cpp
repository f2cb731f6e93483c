#include "mavctl/observer.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace mavctl {

void ObserverNoise::validate() const {
  const double entries[] = {q_position, q_velocity,     q_attitude,
                            q_attitude_rate, q_force,   r_position,
                            r_velocity, r_attitude,     gate_sigma};
  for (double e : entries)
    if (!(e > 0.0))
      throw std::invalid_argument("observer noise entries must be positive");
}

namespace {

Vec3 thrust_axis(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  return {cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr};
}

ObserverMat continuous_jacobian(const ObserverVec& x, const ControlInput& u,
                                const ObserverParams& params, double yaw) {
  ObserverMat j = ObserverMat::Zero();
  const double m = params.vehicle.mass;
  const double kd = params.vehicle.k_drag;
  const double ut = u.u_thrust;
  const double roll = x[6], pitch = x[7];
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);

  j.block<3, 3>(0, 3).setIdentity();

  j(3, 3) = -ut * kd / m;
  j(4, 4) = -ut * kd / m;
  const Vec3 daxis_droll(-cy * sp * sr + sy * cr, -sy * sp * sr - cy * cr,
                         -cp * sr);
  const Vec3 daxis_dpitch(cy * cp * cr, sy * cp * cr, -sp * cr);
  j.block<3, 1>(3, 6) = (ut / m) * daxis_droll;
  j.block<3, 1>(3, 7) = (ut / m) * daxis_dpitch;
  j.block<3, 3>(3, 10) = Mat3::Identity() / m;

  j(6, 8) = 1.0;
  j(7, 9) = 1.0;

  const auto& rm = params.roll;
  const auto& pm = params.pitch;
  j(8, 6) = -rm.omega * rm.omega;
  j(8, 8) = -2.0 * rm.zeta * rm.omega;
  j(9, 7) = -pm.omega * pm.omega;
  j(9, 9) = -2.0 * pm.zeta * pm.omega;
  return j;
}

}  // namespace

ObserverVec observer_dynamics(const ObserverVec& x, const ControlInput& u,
                              const ObserverParams& params, double yaw) {
  ObserverVec dx = ObserverVec::Zero();
  const double m = params.vehicle.mass;
  const double g = params.vehicle.gravity;
  const double kd = params.vehicle.k_drag;

  dx.segment<3>(0) = x.segment<3>(3);

  const Vec3 axis = thrust_axis(x[6], x[7], yaw);
  Vec3 v_dot = (u.u_thrust * axis + x.segment<3>(10)) / m;
  v_dot.x() -= u.u_thrust * kd * x[3] / m;
  v_dot.y() -= u.u_thrust * kd * x[4] / m;
  v_dot.z() -= g;
  dx.segment<3>(3) = v_dot;

  dx[6] = x[8];
  dx[7] = x[9];
  const auto& rm = params.roll;
  const auto& pm = params.pitch;
  dx[8] = rm.omega * rm.omega * (rm.k * u.u_phi - x[6]) -
          2.0 * rm.zeta * rm.omega * x[8];
  dx[9] = pm.omega * pm.omega * (pm.k * u.u_theta - x[7]) -
          2.0 * pm.zeta * pm.omega * x[9];
  // force block is a random walk: zero drift
  return dx;
}

ObserverState observer_predict(const ObserverState& s, const ControlInput& u,
                               const ObserverParams& params,
                               const ObserverNoise& noise, double dt,
                               double yaw) {
  if (!(dt > 0.0)) throw std::invalid_argument("observer_predict: dt must be positive");

  const auto f = [&](const ObserverVec& x) {
    return observer_dynamics(x, u, params, yaw);
  };
  const auto jac = [&](const ObserverVec& x) {
    return continuous_jacobian(x, u, params, yaw);
  };

  // RK4 on the mean with the matching discrete Jacobian (chain rule through
  // the stages).
  const ObserverVec& x = s.mean;
  const ObserverVec k1 = f(x);
  const ObserverVec x2 = x + 0.5 * dt * k1;
  const ObserverVec k2 = f(x2);
  const ObserverVec x3 = x + 0.5 * dt * k2;
  const ObserverVec k3 = f(x3);
  const ObserverVec x4 = x + dt * k3;
  const ObserverVec k4 = f(x4);

  const ObserverMat i = ObserverMat::Identity();
  const ObserverMat a1 = jac(x);
  const ObserverMat a2 = jac(x2) * (i + 0.5 * dt * a1);
  const ObserverMat a3 = jac(x3) * (i + 0.5 * dt * a2);
  const ObserverMat a4 = jac(x4) * (i + dt * a3);

  ObserverState out = s;
  out.mean = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  const ObserverMat f_discrete = i + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);

  ObserverVec q_diag;
  q_diag << noise.q_position, noise.q_position, noise.q_position,
      noise.q_velocity, noise.q_velocity, noise.q_velocity, noise.q_attitude,
      noise.q_attitude, noise.q_attitude_rate, noise.q_attitude_rate,
      noise.q_force, noise.q_force, noise.q_force;
  out.covariance = f_discrete * s.covariance * f_discrete.transpose();
  out.covariance.diagonal() += dt * q_diag;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

ObserverState observer_update(const ObserverState& s,
                              const ObserverMeasurement& z,
                              const ObserverNoise& noise) {
  using MeasMat = Eigen::Matrix<double, kObserverMeasDim, kObserverDim>;
  using MeasCov = Eigen::Matrix<double, kObserverMeasDim, kObserverMeasDim>;

  MeasMat h = MeasMat::Zero();
  h.block<3, 3>(0, 0).setIdentity();
  h.block<3, 3>(3, 3).setIdentity();
  h(6, 6) = 1.0;
  h(7, 7) = 1.0;

  ObserverMeasVec zv;
  zv << z.p, z.v, z.roll, z.pitch;
  if (!zv.allFinite())
    throw std::invalid_argument("observer_update: non-finite measurement");

  MeasCov r = MeasCov::Zero();
  r.diagonal() << noise.r_position, noise.r_position, noise.r_position,
      noise.r_velocity, noise.r_velocity, noise.r_velocity, noise.r_attitude,
      noise.r_attitude;

  const ObserverMeasVec innovation = zv - h * s.mean;
  const MeasCov s_mat = h * s.covariance * h.transpose() + r;
  const auto solver = s_mat.ldlt();
  const double mahalanobis2 = innovation.dot(solver.solve(innovation));
  if (mahalanobis2 >
      noise.gate_sigma * noise.gate_sigma * static_cast<double>(kObserverMeasDim)) {
    ObserverState out = s;
    ++out.gate_count;
    return out;
  }

  const Eigen::Matrix<double, kObserverDim, kObserverMeasDim> gain =
      solver.solve(h * s.covariance).transpose();

  ObserverState out = s;
  out.mean = s.mean + gain * innovation;
  const ObserverMat ikh = ObserverMat::Identity() - gain * h;
  out.covariance =
      ikh * s.covariance * ikh.transpose() + gain * r * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

std::pair<Vec3, Mat3> external_force(const ObserverState& s) {
  return {s.mean.segment<3>(10), s.covariance.block<3, 3>(10, 10)};
}

}  // namespace mavctl
