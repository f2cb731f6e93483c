#pragma once

#include <Eigen/Core>

#include "mavctl/geometry.hpp"
#include "mavctl/timesync.hpp"

namespace mavctl {

inline constexpr int kFusionDim = 12;  // p(3) v(3) attitude(3) accel bias(3)

using FusionVec = Eigen::Matrix<double, kFusionDim, 1>;
using FusionMat = Eigen::Matrix<double, kFusionDim, kFusionDim>;

/// Loosely-coupled estimator state: IMU-propagated pose/velocity corrected by
/// odometry, plus an accelerometer bias random walk.
struct FusedState {
  FusionVec mean{FusionVec::Zero()};
  FusionMat covariance{FusionMat::Identity()};
  double stamp{0.0};

  Vec3 position() const { return mean.segment<3>(0); }
  Vec3 velocity() const { return mean.segment<3>(3); }
  EulerAngles attitude() const { return {mean[6], mean[7], mean[8]}; }
  Vec3 accel_bias() const { return mean.segment<3>(9); }
};

/// Pose/velocity measurement from the odometry front-end.
struct OdometryMeasurement {
  Vec3 p{Vec3::Zero()};
  EulerAngles attitude;
  Vec3 v{Vec3::Zero()};
  double stamp{0.0};
  double var_position{1e-4};   // m^2
  double var_attitude{1e-5};   // rad^2
  double var_velocity{4e-4};   // (m/s)^2
};

struct FusionNoise {
  double sigma_gyro{2e-3};     // rad/s/sqrt(Hz)
  double sigma_accel{2e-2};    // m/s^2/sqrt(Hz)
  double q_bias{1e-4};         // (m/s^2)^2/s, bias random walk PSD
  double q_position{1e-9};     // m^2/s, keeps the position block regular
  double max_measurement_lag{0.04};  // s, one propagation step
};

/// Strapdown propagation from one IMU sample. The state stamp advances to the
/// sample stamp; throws std::invalid_argument on out-of-order samples.
FusedState fusion_propagate(const FusedState& s, const ImuSample& imu, double g,
                            const FusionNoise& noise);

/// Joseph-form correction on (p, attitude, v); yaw innovation is wrapped.
FusedState fusion_update(const FusedState& s, const OdometryMeasurement& z,
                         const FusionNoise& noise);

}  // namespace mavctl
