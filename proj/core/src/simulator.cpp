#include "mavctl/simulator.hpp"

#include <cmath>
#include <stdexcept>

namespace mavctl {

const DeadZone& ActuatorModel::dead_zone(Channel c) const {
  switch (c) {
    case Channel::Roll: return dead_zone_phi;
    case Channel::Pitch: return dead_zone_theta;
    case Channel::YawRate: return dead_zone_psi_dot;
    case Channel::VerticalVelocity: return dead_zone_vz;
  }
  return dead_zone_phi;
}

WindProcess::WindProcess(const WindModel& model)
    : model_(model), force_(model.mean_force), rng_(model.seed) {
  if (!(model.gust_corr_time > 0.0))
    throw std::invalid_argument("wind gust correlation time must be positive");
  if (model.gust_sigma < 0.0)
    throw std::invalid_argument("wind gust sigma must be non-negative");
}

Vec3 WindProcess::step(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("wind step: dt must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double theta = dt / model_.gust_corr_time;
  const double diffusion = model_.gust_sigma * std::sqrt(2.0 * theta);
  for (int i = 0; i < 3; ++i) {
    const double eta = normal(rng_);
    force_[i] += (model_.mean_force[i] - force_[i]) * theta + diffusion * eta;
  }
  return force_;
}

namespace {

// Post-trim, post-dead-zone command value in counts.
double effective_command(double command, double trim, const DeadZone& zone) {
  const double clamped = std::clamp(command, -kCommandLimit, kCommandLimit);
  const double centered = clamped - trim;
  return zone.contains(centered) ? 0.0 : centered;
}

struct PipelineInputs {
  double roll_cmd;      // rad
  double pitch_cmd;     // rad
  double yaw_rate_cmd;  // rad/s
  double vertical_cmd;  // m/s (velocity mode) or N (thrust mode)
};

PipelineInputs run_pipeline(const ActuatorCommand& cmd,
                            const ActuatorModel& act,
                            const VehicleParams& params) {
  PipelineInputs in;
  in.roll_cmd = act.scales.lambda_phi *
                effective_command(cmd.c_phi, act.trims.phi, act.dead_zone_phi);
  in.pitch_cmd =
      act.scales.lambda_theta *
      effective_command(cmd.c_theta, act.trims.theta, act.dead_zone_theta);
  in.yaw_rate_cmd =
      act.scales.lambda_psi_dot *
      effective_command(cmd.c_psi_dot, act.trims.psi_dot, act.dead_zone_psi_dot);
  const double vz_counts =
      effective_command(cmd.c_vz, act.trims.vz, act.dead_zone_vz);
  if (act.vertical_mode == VerticalMode::VelocityCommand) {
    in.vertical_cmd = act.scales.lambda_vz * vz_counts;
  } else {
    const double scale = act.thrust_scale > 0.0
                             ? act.thrust_scale
                             : params.mass * params.gravity / kCommandLimit;
    in.vertical_cmd = params.mass * params.gravity + scale * vz_counts;
  }
  return in;
}

// Continuous plant state for integration:
// (p, v, roll, pitch, yaw, roll_rate, pitch_rate, yaw_rate)
using PlantVec = Eigen::Matrix<double, 12, 1>;

PlantVec pack(const PlantState& s) {
  PlantVec x;
  x << s.p, s.v, s.attitude.roll, s.attitude.pitch, s.attitude.yaw,
      s.roll_rate, s.pitch_rate, s.yaw_rate;
  return x;
}

void unpack(const PlantVec& x, PlantState& s) {
  s.p = x.segment<3>(0);
  s.v = x.segment<3>(3);
  s.attitude.roll = x[6];
  s.attitude.pitch = x[7];
  s.attitude.yaw = x[8];
  s.roll_rate = x[9];
  s.pitch_rate = x[10];
  s.yaw_rate = x[11];
}

double thrust_from_vertical(const PlantVec& x, const PipelineInputs& in,
                            const ActuatorModel& act,
                            const VehicleParams& params) {
  if (act.vertical_mode == VerticalMode::ThrustCommand)
    return std::clamp(in.vertical_cmd, 0.0, params.thrust_max);
  // The autopilot's vertical loop tracks commanded climb rate with the
  // identified first-order response; thrust is back-solved from it.
  const double vz = x[5];
  const double vz_dot_desired =
      (act.vertical.k * in.vertical_cmd - vz) / act.vertical.tau;
  const double tilt = std::cos(x[6]) * std::cos(x[7]);
  const double thrust =
      params.mass * (vz_dot_desired + params.gravity) / std::max(tilt, 0.1);
  return std::clamp(thrust, 0.0, params.thrust_max);
}

PlantVec plant_derivative(const PlantVec& x, const PipelineInputs& in,
                          const ActuatorModel& act, const VehicleParams& params,
                          const Vec3& wind_force) {
  PlantVec dx;
  const double thrust = thrust_from_vertical(x, in, act, params);

  const double cr = std::cos(x[6]), sr = std::sin(x[6]);
  const double cp = std::cos(x[7]), sp = std::sin(x[7]);
  const double cy = std::cos(x[8]), sy = std::sin(x[8]);
  const Vec3 axis(cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr);

  dx.segment<3>(0) = x.segment<3>(3);
  Vec3 v_dot = (thrust * axis + wind_force) / params.mass;
  v_dot.x() -= thrust * params.k_drag * x[3] / params.mass;
  v_dot.y() -= thrust * params.k_drag * x[4] / params.mass;
  v_dot.z() -= params.gravity;
  dx.segment<3>(3) = v_dot;

  dx[6] = x[9];
  dx[7] = x[10];
  dx[8] = x[11];
  dx[9] = act.roll.omega * act.roll.omega * (act.roll.k * in.roll_cmd - x[6]) -
          2.0 * act.roll.zeta * act.roll.omega * x[9];
  dx[10] =
      act.pitch.omega * act.pitch.omega * (act.pitch.k * in.pitch_cmd - x[7]) -
      2.0 * act.pitch.zeta * act.pitch.omega * x[10];
  dx[11] = (act.yaw_rate.k * in.yaw_rate_cmd - x[11]) / act.yaw_rate.tau;
  return dx;
}

}  // namespace

PlantState plant_step(const PlantState& s, const ActuatorCommand& cmd,
                      const ActuatorModel& actuators, const VehicleParams& params,
                      const Vec3& wind_force, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("plant_step: dt must be positive");
  const PipelineInputs in = run_pipeline(cmd, actuators, params);

  const PlantVec x = pack(s);
  const PlantVec k1 = plant_derivative(x, in, actuators, params, wind_force);
  const PlantVec k2 =
      plant_derivative(x + 0.5 * dt * k1, in, actuators, params, wind_force);
  const PlantVec k3 =
      plant_derivative(x + 0.5 * dt * k2, in, actuators, params, wind_force);
  const PlantVec k4 =
      plant_derivative(x + dt * k3, in, actuators, params, wind_force);

  PlantState out = s;
  unpack(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), out);
  out.wind_force = wind_force;
  out.time = s.time + dt;
  return out;
}

Vec3 plant_acceleration(const PlantState& s, const ActuatorCommand& cmd,
                        const ActuatorModel& actuators,
                        const VehicleParams& params, const Vec3& wind_force) {
  const PipelineInputs in = run_pipeline(cmd, actuators, params);
  return plant_derivative(pack(s), in, actuators, params, wind_force)
      .segment<3>(3);
}

Plant::Plant(const VehicleParams& params, const ActuatorModel& actuators,
             const WindModel& wind)
    : params_(params), actuators_(actuators), wind_(wind) {
  params_.validate();
  state_.wind_force = wind_.force();
}

void Plant::step(const ActuatorCommand& cmd, double dt) {
  const Vec3 force = wind_.force();
  state_ = plant_step(state_, cmd, actuators_, params_, force, dt);
  accel_ = plant_acceleration(state_, cmd, actuators_, params_, force);
  last_cmd_ = cmd;
  wind_.step(dt);
}

ActuatorCommand to_actuator_command(const ControlInput& u,
                                    const ActuatorModel& actuators,
                                    const VehicleParams& params) {
  const auto channel_counts = [&](double value, Channel c) {
    const double scale = actuators.scales.get(c);
    double counts = value / scale;
    if (actuators.compensate_dead_zone && counts != 0.0) {
      const DeadZone& zone = actuators.dead_zone(c);
      if (zone.contains(counts))
        counts = counts > 0.0 ? zone.upper : zone.lower;
    }
    counts += actuators.trims.get(c);
    return std::clamp(counts, -kCommandLimit, kCommandLimit);
  };

  ActuatorCommand cmd;
  cmd.c_phi = channel_counts(u.u_phi, Channel::Roll);
  cmd.c_theta = channel_counts(u.u_theta, Channel::Pitch);
  cmd.c_psi_dot = channel_counts(u.u_psi_dot, Channel::YawRate);
  if (actuators.vertical_mode == VerticalMode::ThrustCommand) {
    const double scale = actuators.thrust_scale > 0.0
                             ? actuators.thrust_scale
                             : params.mass * params.gravity / kCommandLimit;
    double counts = (u.u_thrust - params.mass * params.gravity) / scale;
    counts += actuators.trims.vz;
    cmd.c_vz = std::clamp(counts, -kCommandLimit, kCommandLimit);
  } else {
    // Velocity mode has no direct thrust input; the vertical stick carries a
    // climb-rate command instead and must be produced by the caller.
    cmd.c_vz = std::clamp(u.u_thrust, -kCommandLimit, kCommandLimit);
  }
  return cmd;
}

namespace {
// E|| (Z1, Z2, Z3/2) || for standard normal Z; calibrates the drift walk so
// the expected offset/path-length ratio hits drift_rate at the 180 m
// reference path.
constexpr double kDriftNormFactor = 1.3637;
constexpr double kDriftReferencePath = 180.0;  // m
}  // namespace

OdometryEmulator::OdometryEmulator(const OdometryEmulatorConfig& config)
    : config_(config), rng_(config.seed) {
  if (config.drift_rate < 0.0 || config.drift_rate >= 0.05)
    throw std::invalid_argument("odometry drift rate out of range [0, 0.05)");
  sigma_per_sqrt_m_ =
      config.drift_rate * std::sqrt(kDriftReferencePath) / kDriftNormFactor;
}

OdometryMeasurement OdometryEmulator::sample(const PlantState& truth,
                                             double stamp) {
  std::normal_distribution<double> normal(0.0, 1.0);

  double ds = 0.0;
  if (last_position_) ds = (truth.p - *last_position_).norm();
  last_position_ = truth.p;

  const double walk = sigma_per_sqrt_m_ * std::sqrt(ds);
  drift_.x() += walk * normal(rng_);
  drift_.y() += walk * normal(rng_);
  drift_.z() += 0.5 * walk * normal(rng_);  // weaker vertical observability

  OdometryMeasurement z;
  z.p = truth.p + drift_ +
        config_.sigma_position * Vec3(normal(rng_), normal(rng_), normal(rng_));
  z.attitude.roll = truth.attitude.roll + config_.sigma_attitude * normal(rng_);
  z.attitude.pitch = truth.attitude.pitch + config_.sigma_attitude * normal(rng_);
  z.attitude.yaw =
      wrap_angle(truth.attitude.yaw + config_.sigma_attitude * normal(rng_));
  z.v = truth.v +
        config_.sigma_velocity * Vec3(normal(rng_), normal(rng_), normal(rng_));
  z.stamp = stamp;
  z.var_position = std::max(config_.sigma_position * config_.sigma_position, 1e-12);
  z.var_attitude = std::max(config_.sigma_attitude * config_.sigma_attitude, 1e-12);
  z.var_velocity = std::max(config_.sigma_velocity * config_.sigma_velocity, 1e-12);
  return z;
}

VehicleImuSensor::VehicleImuSensor(const ImuNoiseConfig& config)
    : config_(config), rng_(config.seed) {}

ImuSample VehicleImuSensor::sample(const Plant& plant, double stamp) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const PlantState& s = plant.state();

  // Body rates from Euler rates.
  const double cr = std::cos(s.attitude.roll), sr = std::sin(s.attitude.roll);
  const double cp = std::cos(s.attitude.pitch), sp = std::sin(s.attitude.pitch);
  Mat3 w;
  w << 1.0, 0.0, -sp,
       0.0, cr, sr * cp,
       0.0, -sr, cr * cp;
  const Vec3 euler_rates(s.roll_rate, s.pitch_rate, s.yaw_rate);

  ImuSample sample;
  sample.stamp = stamp;
  sample.gyro = w * euler_rates +
                config_.sigma_gyro * Vec3(normal(rng_), normal(rng_), normal(rng_));
  const RotationMatrix r = rotation_from_euler(s.attitude);
  const Vec3 specific_force =
      r.transpose() * (plant.acceleration() + Vec3(0.0, 0.0, plant.params().gravity));
  sample.accel =
      specific_force +
      config_.sigma_accel * Vec3(normal(rng_), normal(rng_), normal(rng_));
  return sample;
}

}  // namespace mavctl
