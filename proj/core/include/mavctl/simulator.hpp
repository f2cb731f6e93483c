#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "mavctl/dynamics.hpp"
#include "mavctl/fusion.hpp"
#include "mavctl/sysid.hpp"
#include "mavctl/timesync.hpp"

namespace mavctl {

/// Full plant state: rigid body plus inner-loop attitude dynamics.
struct PlantState {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  EulerAngles attitude;
  double roll_rate{0.0};   // rad/s
  double pitch_rate{0.0};  // rad/s
  double yaw_rate{0.0};    // rad/s
  Vec3 wind_force{Vec3::Zero()};  // N, force applied during the last step
  double time{0.0};
};

enum class VerticalMode { VelocityCommand, ThrustCommand };

/// Transmitter-to-response pipeline: trim, dead zones, count scaling, and the
/// identified attitude / yaw-rate / vertical dynamics.
struct ActuatorModel {
  ScaleParams scales;
  TrimOffset trims;
  DeadZone dead_zone_phi, dead_zone_theta, dead_zone_psi_dot, dead_zone_vz;
  SecondOrderModel roll{0.975, 0.512, 5.200};
  SecondOrderModel pitch{1.052, 0.573, 5.239};
  FirstOrderModel yaw_rate{1.057, 0.161};
  FirstOrderModel vertical{1.118, 0.334};
  VerticalMode vertical_mode{VerticalMode::VelocityCommand};
  /// N/count mapping around hover for ThrustCommand mode (0 selects m*g/1024).
  double thrust_scale{0.0};
  /// Command adapter pushes in-band commands to the dead-zone edge.
  bool compensate_dead_zone{true};

  const DeadZone& dead_zone(Channel c) const;
};

/// Ornstein-Uhlenbeck gusts around a constant mean force.
struct WindModel {
  Vec3 mean_force{Vec3::Zero()};  // N
  double gust_sigma{0.0};         // N, stationary std per axis
  double gust_corr_time{1.5};     // s
  std::uint64_t seed{0};
};

class WindProcess {
 public:
  explicit WindProcess(const WindModel& model);

  const Vec3& force() const { return force_; }
  Vec3 step(double dt);

 private:
  WindModel model_;
  Vec3 force_;
  std::mt19937_64 rng_;
};

/// One plant integration step (RK4, command and wind force held over dt).
PlantState plant_step(const PlantState& s, const ActuatorCommand& cmd,
                      const ActuatorModel& actuators, const VehicleParams& params,
                      const Vec3& wind_force, double dt);

/// Translational acceleration consistent with plant_step's derivative.
Vec3 plant_acceleration(const PlantState& s, const ActuatorCommand& cmd,
                        const ActuatorModel& actuators,
                        const VehicleParams& params, const Vec3& wind_force);

/// Mutable world: owns the state, the wind process, and the last-step
/// acceleration cache. One instance per scenario run.
class Plant {
 public:
  Plant(const VehicleParams& params, const ActuatorModel& actuators,
        const WindModel& wind);

  const PlantState& state() const { return state_; }
  void set_state(const PlantState& s) { state_ = s; }
  const VehicleParams& params() const { return params_; }
  const ActuatorModel& actuators() const { return actuators_; }

  void step(const ActuatorCommand& cmd, double dt);
  /// Acceleration at the end of the last step.
  const Vec3& acceleration() const { return accel_; }

 private:
  VehicleParams params_;
  ActuatorModel actuators_;
  WindProcess wind_;
  PlantState state_;
  ActuatorCommand last_cmd_;
  Vec3 accel_{Vec3::Zero()};
};

/// Inverse-scaling adapter: physical inputs to transmitter counts, applying
/// trim and (optionally) dead-zone edge compensation.
ActuatorCommand to_actuator_command(const ControlInput& u,
                                    const ActuatorModel& actuators,
                                    const VehicleParams& params);

/// Drifting pose source standing in for the visual-inertial odometry.
struct OdometryEmulatorConfig {
  double sigma_position{0.0};   // m
  double sigma_attitude{0.0};   // rad
  double sigma_velocity{0.0};   // m/s
  double drift_rate{0.0082};    // expected final offset / path length at 180 m
  double rate{30.0};            // Hz
  std::uint64_t seed{1};
};

class OdometryEmulator {
 public:
  explicit OdometryEmulator(const OdometryEmulatorConfig& config);

  OdometryMeasurement sample(const PlantState& truth, double stamp);
  const Vec3& drift() const { return drift_; }

 private:
  OdometryEmulatorConfig config_;
  double sigma_per_sqrt_m_;
  Vec3 drift_{Vec3::Zero()};
  std::optional<Vec3> last_position_;
  std::mt19937_64 rng_;
};

struct ImuNoiseConfig {
  double sigma_gyro{0.0};   // rad/s
  double sigma_accel{0.0};  // m/s^2
  std::uint64_t seed{2};
};

/// Autopilot IMU emulation: body rates and specific force from the plant.
class VehicleImuSensor {
 public:
  explicit VehicleImuSensor(const ImuNoiseConfig& config);

  ImuSample sample(const Plant& plant, double stamp);

 private:
  ImuNoiseConfig config_;
  std::mt19937_64 rng_;
};

}  // namespace mavctl
