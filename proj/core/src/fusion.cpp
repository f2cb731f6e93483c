#include "mavctl/fusion.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace mavctl {

namespace {

// Euler-rate mapping: (roll', pitch', yaw') = E(roll, pitch) * body_rates.
Mat3 euler_rate_matrix(double roll, double pitch) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), tp = std::tan(pitch);
  Mat3 e;
  e << 1.0, sr * tp, cr * tp,
       0.0, cr, -sr,
       0.0, sr / cp, cr / cp;
  return e;
}

void rotation_derivatives(const EulerAngles& a, Mat3& dr_droll, Mat3& dr_dpitch,
                          Mat3& dr_dyaw) {
  const double cr = std::cos(a.roll), sr = std::sin(a.roll);
  const double cp = std::cos(a.pitch), sp = std::sin(a.pitch);
  const double cy = std::cos(a.yaw), sy = std::sin(a.yaw);
  dr_droll << 0.0, cy * sp * cr + sy * sr, -cy * sp * sr + sy * cr,
              0.0, sy * sp * cr - cy * sr, -sy * sp * sr - cy * cr,
              0.0, cp * cr, -cp * sr;
  dr_dpitch << -cy * sp, cy * cp * sr, cy * cp * cr,
               -sy * sp, sy * cp * sr, sy * cp * cr,
               -cp, -sp * sr, -sp * cr;
  dr_dyaw << -sy * cp, -sy * sp * sr - cy * cr, -sy * sp * cr + cy * sr,
             cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
             0.0, 0.0, 0.0;
}

}  // namespace

FusedState fusion_propagate(const FusedState& s, const ImuSample& imu, double g,
                            const FusionNoise& noise) {
  const double dt = imu.stamp - s.stamp;
  if (dt < 0.0)
    throw std::invalid_argument("fusion_propagate: out-of-order IMU sample");
  if (dt == 0.0) return s;

  const EulerAngles att = s.attitude();
  const Vec3 bias = s.accel_bias();
  const Vec3 specific_force = imu.accel - bias;
  const RotationMatrix r = rotation_from_euler(att);
  const Vec3 accel_world = r * specific_force + Vec3(0.0, 0.0, -g);

  // Midpoint integration for attitude, constant-acceleration kinematics for
  // translation.
  const Mat3 e0 = euler_rate_matrix(att.roll, att.pitch);
  const Vec3 rate0 = e0 * imu.gyro;
  const EulerAngles att_mid{att.roll + 0.5 * dt * rate0.x(),
                            att.pitch + 0.5 * dt * rate0.y(),
                            att.yaw + 0.5 * dt * rate0.z()};
  const Vec3 rate_mid = euler_rate_matrix(att_mid.roll, att_mid.pitch) * imu.gyro;

  FusedState out = s;
  out.stamp = imu.stamp;
  out.mean.segment<3>(0) += dt * s.velocity() + 0.5 * dt * dt * accel_world;
  out.mean.segment<3>(3) += dt * accel_world;
  out.mean.segment<3>(6) += dt * rate_mid;
  out.mean[8] = wrap_angle(out.mean[8]);

  // First-order covariance propagation.
  FusionMat jac = FusionMat::Zero();
  jac.block<3, 3>(0, 3).setIdentity();
  Mat3 dr_droll, dr_dpitch, dr_dyaw;
  rotation_derivatives(att, dr_droll, dr_dpitch, dr_dyaw);
  jac.block<3, 1>(3, 6) = dr_droll * specific_force;
  jac.block<3, 1>(3, 7) = dr_dpitch * specific_force;
  jac.block<3, 1>(3, 8) = dr_dyaw * specific_force;
  jac.block<3, 3>(3, 9) = -r;

  // d(E(att)*gyro)/d(roll, pitch)
  const double cr = std::cos(att.roll), sr = std::sin(att.roll);
  const double cp = std::cos(att.pitch), tp = std::tan(att.pitch);
  const double q = imu.gyro.y(), rr = imu.gyro.z();
  jac(6, 6) = (q * cr - rr * sr) * tp;
  jac(6, 7) = (q * sr + rr * cr) / (cp * cp);
  jac(7, 6) = -q * sr - rr * cr;
  jac(8, 6) = (q * cr - rr * sr) / cp;
  jac(8, 7) = (q * sr + rr * cr) * tp / cp;

  const FusionMat f = FusionMat::Identity() + dt * jac;

  FusionMat q_proc = FusionMat::Zero();
  q_proc.block<3, 3>(0, 0) = noise.q_position * Mat3::Identity();
  q_proc.block<3, 3>(3, 3) = noise.sigma_accel * noise.sigma_accel * Mat3::Identity();
  q_proc.block<3, 3>(6, 6) =
      e0 * (noise.sigma_gyro * noise.sigma_gyro * Mat3::Identity()) * e0.transpose();
  q_proc.block<3, 3>(9, 9) = noise.q_bias * Mat3::Identity();

  out.covariance = f * s.covariance * f.transpose() + dt * q_proc;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

FusedState fusion_update(const FusedState& s, const OdometryMeasurement& z,
                         const FusionNoise& noise) {
  if (std::abs(z.stamp - s.stamp) > noise.max_measurement_lag)
    throw std::invalid_argument("fusion_update: measurement stamp out of window");

  using MeasMat = Eigen::Matrix<double, 9, kFusionDim>;
  using MeasCov = Eigen::Matrix<double, 9, 9>;
  using MeasVec = Eigen::Matrix<double, 9, 1>;

  MeasMat h = MeasMat::Zero();
  h.block<3, 3>(0, 0).setIdentity();   // position
  h.block<3, 3>(3, 6).setIdentity();   // attitude
  h.block<3, 3>(6, 3).setIdentity();   // velocity

  MeasVec innovation;
  innovation.segment<3>(0) = z.p - s.position();
  innovation[3] = z.attitude.roll - s.mean[6];
  innovation[4] = z.attitude.pitch - s.mean[7];
  innovation[5] = wrap_angle(z.attitude.yaw - s.mean[8]);
  innovation.segment<3>(6) = z.v - s.velocity();
  if (!innovation.allFinite())
    throw std::invalid_argument("fusion_update: non-finite measurement");

  MeasCov r = MeasCov::Zero();
  r.diagonal() << z.var_position, z.var_position, z.var_position,
      z.var_attitude, z.var_attitude, z.var_attitude, z.var_velocity,
      z.var_velocity, z.var_velocity;

  const MeasCov s_mat = h * s.covariance * h.transpose() + r;
  const Eigen::Matrix<double, kFusionDim, 9> gain =
      s_mat.ldlt().solve(h * s.covariance).transpose();

  FusedState out = s;
  out.mean = s.mean + gain * innovation;
  out.mean[8] = wrap_angle(out.mean[8]);
  const FusionMat ikh = FusionMat::Identity() - gain * h;
  out.covariance =
      ikh * s.covariance * ikh.transpose() + gain * r * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

}  // namespace mavctl
