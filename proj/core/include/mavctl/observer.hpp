#pragma once

#include <Eigen/Core>

#include "mavctl/dynamics.hpp"
#include "mavctl/sysid.hpp"

namespace mavctl {

inline constexpr int kObserverDim = 13;  // p(3) v(3) phi theta phi' theta' F(3)
inline constexpr int kObserverMeasDim = 8;  // p(3) v(3) phi theta

using ObserverVec = Eigen::Matrix<double, kObserverDim, 1>;
using ObserverMat = Eigen::Matrix<double, kObserverDim, kObserverDim>;
using ObserverMeasVec = Eigen::Matrix<double, kObserverMeasDim, 1>;

/// Augmented filter state: kinematics, second-order attitude pair, and the
/// external-force random walk.
struct ObserverState {
  ObserverVec mean{ObserverVec::Zero()};
  ObserverMat covariance{ObserverMat::Identity()};
  std::size_t gate_count{0};  // measurements rejected by the innovation gate

  Vec3 position() const { return mean.segment<3>(0); }
  Vec3 velocity() const { return mean.segment<3>(3); }
  double roll() const { return mean[6]; }
  double pitch() const { return mean[7]; }
  Vec3 force() const { return mean.segment<3>(10); }
};

/// Process PSDs and measurement variances. All strictly positive.
struct ObserverNoise {
  double q_position{1e-6};    // m^2/s
  double q_velocity{1e-4};    // (m/s)^2/s
  double q_attitude{1e-6};    // rad^2/s
  double q_attitude_rate{1e-3};  // (rad/s)^2/s
  double q_force{0.5};        // N^2/s, force random walk
  double r_position{1e-4};    // m^2
  double r_velocity{4e-4};    // (m/s)^2
  double r_attitude{1e-5};    // rad^2

  double gate_sigma{5.0};     // Mahalanobis gate, in sigmas

  void validate() const;
};

/// Vehicle constants plus the second-order inner-loop models the filter
/// propagates.
struct ObserverParams {
  VehicleParams vehicle;
  SecondOrderModel roll{0.975, 0.512, 5.200};
  SecondOrderModel pitch{1.052, 0.573, 5.239};
};

/// Measurement of (p, v, roll, pitch) with per-block variances taken from
/// ObserverNoise.
struct ObserverMeasurement {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  double roll{0.0};
  double pitch{0.0};
};

/// Propagates mean (RK4) and covariance (discrete Jacobian, P = FPF' + Q*dt).
/// `yaw` is the current heading estimate, treated as a known parameter.
ObserverState observer_predict(const ObserverState& s, const ControlInput& u,
                               const ObserverParams& params,
                               const ObserverNoise& noise, double dt,
                               double yaw = 0.0);

/// Joseph-form EKF correction with Mahalanobis gating; gated updates leave
/// the state untouched apart from the gate counter.
ObserverState observer_update(const ObserverState& s,
                              const ObserverMeasurement& z,
                              const ObserverNoise& noise);

/// External-force estimate with its covariance block.
std::pair<Vec3, Mat3> external_force(const ObserverState& s);

/// Continuous-time dynamics of the observer state (exposed for testing).
ObserverVec observer_dynamics(const ObserverVec& x, const ControlInput& u,
                              const ObserverParams& params, double yaw);

}  // namespace mavctl
