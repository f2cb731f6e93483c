#include "mavctl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "mavctl/csv.hpp"

namespace mavctl {

const char* scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Hover: return "hover";
    case ScenarioKind::Step: return "step";
    case ScenarioKind::Trajectory: return "trajectory";
    case ScenarioKind::Figure8: return "figure8";
    case ScenarioKind::SysidSweep: return "sysid-sweep";
  }
  return "?";
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ScenarioKind scenario_from_name(const std::string& name) {
  if (name == "hover") return ScenarioKind::Hover;
  if (name == "step") return ScenarioKind::Step;
  if (name == "trajectory") return ScenarioKind::Trajectory;
  if (name == "figure8") return ScenarioKind::Figure8;
  if (name == "sysid-sweep") return ScenarioKind::SysidSweep;
  throw ConfigError("unknown scenario: " + name);
}

void apply_noise_preset(ScenarioConfig& out, const std::string& preset) {
  if (preset == "none") {
    out.odometry.sigma_position = 0.0;
    out.odometry.sigma_attitude = 0.0;
    out.odometry.sigma_velocity = 0.0;
    out.imu.sigma_gyro = 0.0;
    out.imu.sigma_accel = 0.0;
  } else if (preset == "indoor") {
    out.odometry.sigma_position = 0.004;
    out.odometry.sigma_attitude = 0.003;
    out.odometry.sigma_velocity = 0.02;
    out.imu.sigma_gyro = 0.002;
    out.imu.sigma_accel = 0.02;
  } else if (preset == "outdoor") {
    out.odometry.sigma_position = 0.008;
    out.odometry.sigma_attitude = 0.006;
    out.odometry.sigma_velocity = 0.04;
    out.imu.sigma_gyro = 0.002;
    out.imu.sigma_accel = 0.03;
  } else {
    throw ConfigError("unknown noise preset: " + preset);
  }
}

}  // namespace

ScenarioConfig ScenarioConfig::from_config(const Config& cfg) {
  ScenarioConfig out;
  out.scenario = scenario_from_name(cfg.get_string("scenario", "hover"));
  out.duration = cfg.get_double("duration", out.duration);
  if (!(out.duration > 0.0)) throw ConfigError("duration must be positive");
  out.seed = static_cast<std::uint64_t>(cfg.get_double("seed", 1.0));

  out.noise_preset = cfg.get_string("noise.preset", "none");
  apply_noise_preset(out, out.noise_preset);

  out.wind_enabled = cfg.get_bool("wind.enabled", false);
  out.wind.mean_force = Vec3(cfg.get_double("wind.mean_force_x", 2.5),
                             cfg.get_double("wind.mean_force_y", 0.0),
                             cfg.get_double("wind.mean_force_z", 0.0));
  out.wind.gust_sigma = cfg.get_double("wind.gust_sigma", 0.4);
  out.wind.gust_corr_time = cfg.get_double("wind.gust_corr_time", 1.5);

  auto& v = out.vehicle;
  v.mass = cfg.get_double("vehicle.mass", v.mass);
  v.k_drag = cfg.get_double("vehicle.k_drag", v.k_drag);
  v.gravity = cfg.get_double("vehicle.gravity", v.gravity);
  v.tau_phi = cfg.get_double("vehicle.tau_phi", v.tau_phi);
  v.tau_theta = cfg.get_double("vehicle.tau_theta", v.tau_theta);
  v.k_phi = cfg.get_double("vehicle.k_phi", v.k_phi);
  v.k_theta = cfg.get_double("vehicle.k_theta", v.k_theta);
  v.thrust_max = cfg.get_double("vehicle.thrust_max", v.thrust_max);
  v.attitude_limit = cfg.get_double("vehicle.attitude_limit", v.attitude_limit);
  v.validate();

  auto& a = out.actuators;
  a.scales.lambda_phi = cfg.get_double("actuator.lambda_phi", a.scales.lambda_phi);
  a.scales.lambda_theta =
      cfg.get_double("actuator.lambda_theta", a.scales.lambda_theta);
  a.scales.lambda_psi_dot =
      cfg.get_double("actuator.lambda_psidot", a.scales.lambda_psi_dot);
  a.scales.lambda_vz = cfg.get_double("actuator.lambda_vz", a.scales.lambda_vz);
  a.trims.phi = cfg.get_double("actuator.trim_phi", 0.0);
  a.trims.theta = cfg.get_double("actuator.trim_theta", 0.0);
  a.trims.psi_dot = cfg.get_double("actuator.trim_psidot", 0.0);
  a.trims.vz = cfg.get_double("actuator.trim_vz", 0.0);
  const auto load_zone = [&](const std::string& name, DeadZone& zone) {
    zone.lower = cfg.get_double("actuator.deadzone_" + name + "_lower", 0.0);
    zone.upper = cfg.get_double("actuator.deadzone_" + name + "_upper", 0.0);
    if (zone.lower > 0.0 || zone.upper < 0.0)
      throw ConfigError("dead zone must contain zero: " + name);
  };
  load_zone("phi", a.dead_zone_phi);
  load_zone("theta", a.dead_zone_theta);
  load_zone("psidot", a.dead_zone_psi_dot);
  load_zone("vz", a.dead_zone_vz);
  a.roll.k = cfg.get_double("actuator.roll_k", a.roll.k);
  a.roll.zeta = cfg.get_double("actuator.roll_zeta", a.roll.zeta);
  a.roll.omega = cfg.get_double("actuator.roll_omega", a.roll.omega);
  a.pitch.k = cfg.get_double("actuator.pitch_k", a.pitch.k);
  a.pitch.zeta = cfg.get_double("actuator.pitch_zeta", a.pitch.zeta);
  a.pitch.omega = cfg.get_double("actuator.pitch_omega", a.pitch.omega);
  a.yaw_rate.k = cfg.get_double("actuator.yawrate_k", a.yaw_rate.k);
  a.yaw_rate.tau = cfg.get_double("actuator.yawrate_tau", a.yaw_rate.tau);
  a.vertical.k = cfg.get_double("actuator.vertical_k", a.vertical.k);
  a.vertical.tau = cfg.get_double("actuator.vertical_tau", a.vertical.tau);
  const std::string default_mode =
      out.scenario == ScenarioKind::SysidSweep ? "velocity" : "thrust";
  const std::string mode = cfg.get_string("actuator.vertical_mode", default_mode);
  if (mode == "velocity")
    a.vertical_mode = VerticalMode::VelocityCommand;
  else if (mode == "thrust")
    a.vertical_mode = VerticalMode::ThrustCommand;
  else
    throw ConfigError("actuator.vertical_mode must be velocity or thrust");
  a.thrust_scale = cfg.get_double("actuator.thrust_scale", 0.0);
  a.compensate_dead_zone =
      cfg.get_bool("actuator.compensate_dead_zone", a.compensate_dead_zone);

  out.odometry.sigma_position =
      cfg.get_double("odometry.sigma_position", out.odometry.sigma_position);
  out.odometry.sigma_attitude =
      cfg.get_double("odometry.sigma_attitude", out.odometry.sigma_attitude);
  out.odometry.sigma_velocity =
      cfg.get_double("odometry.sigma_velocity", out.odometry.sigma_velocity);
  out.odometry.drift_rate =
      cfg.get_double("odometry.drift_rate", out.odometry.drift_rate);
  out.imu.sigma_gyro = cfg.get_double("imu.sigma_gyro", out.imu.sigma_gyro);
  out.imu.sigma_accel = cfg.get_double("imu.sigma_accel", out.imu.sigma_accel);

  out.fusion.sigma_gyro = cfg.get_double(
      "fusion.sigma_gyro", std::max(out.imu.sigma_gyro / 7.0, 1e-5));
  out.fusion.sigma_accel = cfg.get_double(
      "fusion.sigma_accel", std::max(out.imu.sigma_accel / 7.0, 1e-4));
  out.fusion.q_bias = cfg.get_double("fusion.q_bias", out.fusion.q_bias);

  auto& ob = out.observer;
  ob.q_position = cfg.get_double("observer.q_position", ob.q_position);
  ob.q_velocity = cfg.get_double("observer.q_velocity", ob.q_velocity);
  ob.q_attitude = cfg.get_double("observer.q_attitude", ob.q_attitude);
  ob.q_attitude_rate =
      cfg.get_double("observer.q_attitude_rate", ob.q_attitude_rate);
  ob.q_force = cfg.get_double("observer.q_force", ob.q_force);
  ob.r_position = cfg.get_double("observer.r_position", ob.r_position);
  ob.r_velocity = cfg.get_double("observer.r_velocity", ob.r_velocity);
  ob.r_attitude = cfg.get_double("observer.r_attitude", ob.r_attitude);
  ob.gate_sigma = cfg.get_double("observer.gate_sigma", ob.gate_sigma);
  ob.validate();
  out.observer_params.vehicle = v;
  out.observer_params.roll = a.roll;
  out.observer_params.pitch = a.pitch;

  auto& c = out.controller;
  c.ocp.horizon = cfg.get_double("controller.horizon", 2.0);
  c.ocp.n_steps = cfg.get_int("controller.steps", 20);
  c.ocp.params = v;
  const auto q = cfg.get_vector("controller.q_state",
                                {40, 40, 60, 20, 20, 25, 10, 10});
  const auto r = cfg.get_vector("controller.r_input", {35, 35, 2});
  if (q.size() != 8 || r.size() != 3)
    throw ConfigError("controller.q_state needs 8 entries, r_input needs 3");
  for (int i = 0; i < 8; ++i) c.ocp.weights.q_state[i] = q[i];
  for (int i = 0; i < 3; ++i) c.ocp.weights.r_input[i] = r[i];
  const double p_scale = cfg.get_double("controller.p_scale", 10.0);
  c.ocp.weights.p_terminal = p_scale * c.ocp.weights.q_state;
  c.ocp.bounds = InputBounds::defaults(v);
  c.ocp.bounds.lo[2] =
      cfg.get_double("controller.thrust_lo_factor", 0.3) * v.mass * v.gravity;
  c.ocp.bounds.hi[2] =
      cfg.get_double("controller.thrust_hi_factor", 1.8) * v.mass * v.gravity;
  c.yaw_gain = cfg.get_double("controller.yaw_gain", 1.0);
  c.yaw_rate_limit = cfg.get_double("controller.yaw_rate_limit", M_PI / 2.0);
  c.ocp.validate();

  out.rates.plant = cfg.get_double("rates.plant", 500.0);
  out.rates.control = cfg.get_double("rates.control", 50.0);
  out.rates.odometry = cfg.get_double("rates.odometry", 30.0);
  out.rates.imu = cfg.get_double("rates.imu", 50.0);
  out.rates.sysid_log = cfg.get_double("rates.sysid_log", 100.0);

  out.timesync.camera_offset =
      cfg.get_double("timesync.camera_offset", out.timesync.camera_offset);
  out.timesync.buffer_size = static_cast<std::size_t>(
      cfg.get_int("timesync.buffer_size", static_cast<int>(out.timesync.buffer_size)));

  out.hover_position = Vec3(cfg.get_double("hover.x", 0.0),
                            cfg.get_double("hover.y", 0.0),
                            cfg.get_double("hover.z", 1.0));
  out.step_offset = Vec3(cfg.get_double("step.x", 1.0),
                         cfg.get_double("step.y", 0.0),
                         cfg.get_double("step.z", 0.0));
  out.step_time = cfg.get_double("step.time", 5.0);

  out.fig8_width = cfg.get_double("figure8.width", out.fig8_width);
  out.fig8_height = cfg.get_double("figure8.height", out.fig8_height);
  out.fig8_period = cfg.get_double("figure8.period", out.fig8_period);
  out.fig8_yaw_follow = cfg.get_bool("figure8.yaw_follow", false);

  out.waypoint_file = cfg.get_string("trajectory.waypoints", "");

  out.eval_window_begin = cfg.get_double("eval.window_begin", -1.0);
  out.eval_window_end = cfg.get_double("eval.window_end", -1.0);
  out.out_dir = cfg.get_string("out", "");

  auto& sy = out.sysid;
  sy.mode = cfg.get_string("sysid.mode", sy.mode);
  if (sy.mode != "deadzone" && sy.mode != "chirp")
    throw ConfigError("sysid.mode must be deadzone or chirp");
  const std::string ch = cfg.get_string("sysid.channel", "phi");
  const auto parsed = channel_from_name(ch);
  if (!parsed) throw ConfigError("unknown sysid.channel: " + ch);
  sy.channel = *parsed;
  sy.sweep_max = cfg.get_double("sysid.sweep_max", sy.sweep_max);
  sy.sweep_step = cfg.get_double("sysid.sweep_step", sy.sweep_step);
  sy.hold_time = cfg.get_double("sysid.hold_time", sy.hold_time);
  return out;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
  return from_config(Config::from_file(path));
}

double RunLog::duration() const {
  return records.empty() ? 0.0 : records.back().t - records.front().t;
}

double RunLog::path_length() const {
  double length = 0.0;
  for (std::size_t i = 1; i < records.size(); ++i)
    length += (records[i].truth.p - records[i - 1].truth.p).norm();
  return length;
}

namespace {

constexpr const char* kRunLogHeader =
    "t,truth_px,truth_py,truth_pz,truth_vx,truth_vy,truth_vz,truth_roll,"
    "truth_pitch,truth_yaw,est_px,est_py,est_pz,est_vx,est_vy,est_vz,est_roll,"
    "est_pitch,est_yaw,ref_px,ref_py,ref_pz,ref_vx,ref_vy,ref_vz,ref_ax,ref_ay,"
    "ref_az,ref_yaw,ref_yaw_rate,u_phi,u_theta,u_thrust,u_psidot,fext_x,fext_y,"
    "fext_z,wind_x,wind_y,wind_z";

void append_state(std::ostream& out, const StateVector& s) {
  out << ',' << csv::from_double(s.p.x()) << ',' << csv::from_double(s.p.y())
      << ',' << csv::from_double(s.p.z()) << ',' << csv::from_double(s.v.x())
      << ',' << csv::from_double(s.v.y()) << ',' << csv::from_double(s.v.z())
      << ',' << csv::from_double(s.attitude.roll) << ','
      << csv::from_double(s.attitude.pitch) << ','
      << csv::from_double(s.attitude.yaw);
}

}  // namespace

void RunLog::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write run log: " + path);
  out << kRunLogHeader << "\n";
  for (const auto& r : records) {
    out << csv::from_double(r.t);
    append_state(out, r.truth);
    append_state(out, r.estimate);
    for (int i = 0; i < 3; ++i) out << ',' << csv::from_double(r.reference.p[i]);
    for (int i = 0; i < 3; ++i) out << ',' << csv::from_double(r.reference.v[i]);
    for (int i = 0; i < 3; ++i) out << ',' << csv::from_double(r.reference.a[i]);
    out << ',' << csv::from_double(r.reference.yaw) << ','
        << csv::from_double(r.reference.yaw_rate);
    out << ',' << csv::from_double(r.input.u_phi) << ','
        << csv::from_double(r.input.u_theta) << ','
        << csv::from_double(r.input.u_thrust) << ','
        << csv::from_double(r.input.u_psi_dot);
    for (int i = 0; i < 3; ++i) out << ',' << csv::from_double(r.f_ext_estimate[i]);
    for (int i = 0; i < 3; ++i) out << ',' << csv::from_double(r.wind_truth[i]);
    out << "\n";
  }
}

RunLog RunLog::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run log: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kRunLogHeader)
    throw std::runtime_error("run log header mismatch in " + path);
  RunLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 40)
      throw std::runtime_error("run log row with wrong field count in " + path);
    RunRecord r;
    std::size_t i = 0;
    const auto next = [&] { return csv::to_double(f[i++]); };
    // sequence the reads explicitly: argument evaluation order is unspecified
    const auto next3 = [&] {
      Vec3 v;
      v.x() = next();
      v.y() = next();
      v.z() = next();
      return v;
    };
    r.t = next();
    const auto read_state = [&](StateVector& s) {
      s.p = next3();
      s.v = next3();
      s.attitude.roll = next();
      s.attitude.pitch = next();
      s.attitude.yaw = next();
    };
    read_state(r.truth);
    read_state(r.estimate);
    r.reference.p = next3();
    r.reference.v = next3();
    r.reference.a = next3();
    r.reference.yaw = next();
    r.reference.yaw_rate = next();
    r.input.u_phi = next();
    r.input.u_theta = next();
    r.input.u_thrust = next();
    r.input.u_psi_dot = next();
    r.f_ext_estimate = next3();
    r.wind_truth = next3();
    log.records.push_back(r);
  }
  return log;
}

namespace {

// Reference provider plus ownership of the backing trajectory object.
struct Sampler {
  ReferenceSampler fn;
  std::shared_ptr<ReferenceTrajectory> owner;
};

Sampler build_sampler(const ScenarioConfig& cfg) {
  Sampler s;
  switch (cfg.scenario) {
    case ScenarioKind::Hover:
    case ScenarioKind::SysidSweep: {
      const Vec3 p = cfg.hover_position;
      s.fn = [p](double) {
        ReferenceSample out;
        out.p = p;
        return out;
      };
      break;
    }
    case ScenarioKind::Step: {
      const Vec3 p0 = cfg.hover_position;
      const Vec3 p1 = cfg.hover_position + cfg.step_offset;
      const double t_step = cfg.step_time;
      s.fn = [p0, p1, t_step](double t) {
        ReferenceSample out;
        out.p = t < t_step ? p0 : p1;
        return out;
      };
      break;
    }
    case ScenarioKind::Trajectory: {
      std::vector<PiecewiseTrajectory::Waypoint> wps;
      if (!cfg.waypoint_file.empty()) {
        wps = PiecewiseTrajectory::load_waypoints_csv(cfg.waypoint_file);
      } else {
        wps = {{0.0, cfg.hover_position, 0.0},
               {8.0, cfg.hover_position + Vec3(2.0, 1.0, 0.5), 0.0},
               {16.0, cfg.hover_position + Vec3(0.0, 2.0, 0.0), 0.0}};
      }
      auto traj = std::make_shared<PiecewiseTrajectory>(
          PiecewiseTrajectory::from_waypoints(wps));
      s.owner = traj;
      s.fn = [traj](double t) { return traj->sample(std::max(t, 0.0)); };
      break;
    }
    case ScenarioKind::Figure8: {
      const int laps = std::max(
          1, static_cast<int>(std::ceil(cfg.duration / cfg.fig8_period)));
      auto traj = std::make_shared<Figure8Trajectory>(
          cfg.fig8_width, cfg.fig8_height, cfg.fig8_period, cfg.fig8_yaw_follow,
          laps, cfg.hover_position);
      s.owner = traj;
      s.fn = [traj](double t) { return traj->sample(std::max(t, 0.0)); };
      break;
    }
  }
  return s;
}

std::string dump_tail(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  const std::size_t begin = records.size() > 50 ? records.size() - 50 : 0;
  out << "last records (t, truth_p, est_p, input):\n";
  for (std::size_t i = begin; i < records.size(); ++i) {
    const auto& r = records[i];
    out << "  t=" << r.t << " truth=(" << r.truth.p.transpose() << ") est=("
        << r.estimate.p.transpose() << ") u=(" << r.input.u_phi << ", "
        << r.input.u_theta << ", " << r.input.u_thrust << ", "
        << r.input.u_psi_dot << ")\n";
  }
  return out.str();
}

struct SysidCommandScript {
  const ScenarioConfig& cfg;

  ActuatorCommand at(double t) const {
    ActuatorCommand cmd;
    if (cfg.sysid.mode == "deadzone") {
      const auto& sy = cfg.sysid;
      const int n_levels =
          static_cast<int>(std::round(2.0 * sy.sweep_max / sy.sweep_step)) + 1;
      int level = static_cast<int>(t / sy.hold_time);
      level = std::min(level, n_levels - 1);
      cmd.set(cfg.sysid.channel, -sy.sweep_max + level * sy.sweep_step);
      return cmd;
    }
    // Independent slow-to-fast sweeps per channel.
    const double T = cfg.duration;
    const auto chirp = [&](double amp, double f0, double f1) {
      const double phase = 2.0 * M_PI * (f0 * t + 0.5 * (f1 - f0) * t * t / T);
      return amp * std::sin(phase);
    };
    cmd.c_phi = chirp(150.0, 0.05, 1.2);
    cmd.c_theta = chirp(150.0, 0.07, 1.0);
    cmd.c_psi_dot = chirp(250.0, 0.04, 0.8);
    cmd.c_vz = chirp(250.0, 0.03, 0.6);
    return cmd;
  }
};

void run_sysid_engine(const ScenarioConfig& cfg, RunLog* runlog,
                      FlightLog* flightlog) {
  VehicleParams params = cfg.vehicle;
  ActuatorModel act = cfg.actuators;
  act.vertical_mode = VerticalMode::VelocityCommand;  // manual-flight style

  WindModel wind = cfg.wind;
  if (!cfg.wind_enabled) wind = WindModel{Vec3::Zero(), 0.0, wind.gust_corr_time, 0};
  wind.seed = mix_seed(cfg.seed, 1);

  Plant plant(params, act, wind);
  PlantState init;
  init.p = cfg.hover_position;
  plant.set_state(init);

  const SysidCommandScript script{cfg};
  const double dt_log = 1.0 / cfg.rates.sysid_log;
  const int n_sub = std::max(
      1, static_cast<int>(std::round(cfg.rates.plant / cfg.rates.sysid_log)));
  const double dt_plant = dt_log / n_sub;
  const int n_ticks = static_cast<int>(std::round(cfg.duration * cfg.rates.sysid_log));

  for (int k = 0; k < n_ticks; ++k) {
    const double t = k * dt_log;
    const ActuatorCommand cmd = script.at(t);
    const PlantState& s = plant.state();

    if (flightlog) {
      FlightRecord rec;
      rec.t = t;
      rec.command = cmd;
      rec.phi = s.attitude.roll;
      rec.theta = s.attitude.pitch;
      rec.psi = s.attitude.yaw;
      rec.p = s.p;
      rec.v = s.v;
      flightlog->records.push_back(rec);
    }
    if (runlog) {
      RunRecord rec;
      rec.t = t;
      rec.truth = StateVector{s.p, s.v, s.attitude};
      rec.estimate = rec.truth;
      rec.reference.p = cfg.hover_position;
      rec.input.u_phi = act.scales.lambda_phi * cmd.c_phi;
      rec.input.u_theta = act.scales.lambda_theta * cmd.c_theta;
      rec.input.u_psi_dot = act.scales.lambda_psi_dot * cmd.c_psi_dot;
      rec.input.u_thrust = 0.0;
      rec.wind_truth = s.wind_force;
      runlog->records.push_back(rec);
    }
    for (int i = 0; i < n_sub; ++i) plant.step(cmd, dt_plant);
  }
}

RunLog run_closed_loop(const ScenarioConfig& cfg) {
  VehicleParams params = cfg.vehicle;
  params.validate();
  const ActuatorModel& act = cfg.actuators;

  WindModel wind = cfg.wind;
  if (!cfg.wind_enabled) wind = WindModel{Vec3::Zero(), 0.0, wind.gust_corr_time, 0};
  wind.seed = mix_seed(cfg.seed, 1);

  Plant plant(params, act, wind);

  const Sampler sampler = build_sampler(cfg);
  const ReferenceSample start = sampler.fn(0.0);

  PlantState init;
  init.p = start.p;
  init.v = start.v;
  init.attitude.yaw = start.yaw;
  plant.set_state(init);

  FusedState fused;
  fused.mean.segment<3>(0) = init.p;
  fused.mean.segment<3>(3) = init.v;
  fused.mean[8] = start.yaw;
  fused.covariance = FusionMat::Identity() * 1e-6;
  fused.covariance.block<3, 3>(9, 9) = Mat3::Identity() * 1e-8;
  fused.stamp = 0.0;

  ObserverState obs;
  obs.mean.segment<3>(0) = init.p;
  obs.mean.segment<3>(3) = init.v;
  obs.covariance = ObserverMat::Identity() * 1e-4;
  obs.covariance.block<3, 3>(10, 10) = Mat3::Identity() * 4.0;

  ControllerSettings ctl = cfg.controller;
  ctl.ocp.params = params;
  PositionController controller(ctl);

  OdometryEmulatorConfig odo_cfg = cfg.odometry;
  odo_cfg.seed = mix_seed(cfg.seed, 2);
  OdometryEmulator odometry(odo_cfg);

  ImuNoiseConfig imu_cfg = cfg.imu;
  imu_cfg.seed = mix_seed(cfg.seed, 3);
  VehicleImuSensor imu_sensor(imu_cfg);

  ImageSyncMatcher matcher(cfg.timesync.buffer_size);
  ImuMerger merger;

  const double dt_ctrl = 1.0 / cfg.rates.control;
  const int n_sub = std::max(
      1, static_cast<int>(std::round(cfg.rates.plant / cfg.rates.control)));
  const double dt_plant = dt_ctrl / n_sub;
  const int n_ticks = static_cast<int>(std::round(cfg.duration * cfg.rates.control));

  double next_frame = 0.0;
  std::uint64_t frame_seq = 0;
  double next_gyro = 0.0, next_accel = 0.0;
  constexpr double kViGyroRate = 200.0, kViAccelRate = 250.0;

  ControlInput last_input = hover_input(params, Vec3::Zero(), start.yaw);

  RunLog log;
  log.records.reserve(n_ticks);

  for (int k = 0; k < n_ticks; ++k) {
    const double t = k * dt_ctrl;

    const ImuSample imu = imu_sensor.sample(plant, t);
    fused = fusion_propagate(fused, imu, params.gravity, cfg.fusion);

    // Camera frames: the sync message carries the capture time in the IMU
    // clock minus the constant camera-IMU offset; matching plus the offset
    // correction recovers the capture time.
    while (next_frame <= t + 1e-9) {
      const SyncMessage sync{frame_seq, t - cfg.timesync.camera_offset};
      const ImageMessage image{frame_seq, frame_seq, t + 1000.0};
      std::optional<StampedImage> matched;
      if (frame_seq % 7 == 3) {
        matcher.push_image(image);
        matched = matcher.push_sync(sync);
      } else {
        matcher.push_sync(sync);
        matched = matcher.push_image(image);
      }
      if (matched) {
        const double stamp =
            apply_camera_offset(matched->stamp, cfg.timesync.camera_offset);
        const OdometryMeasurement z = odometry.sample(plant.state(), stamp);
        fused = fusion_update(fused, z, cfg.fusion);
      }
      next_frame += 1.0 / cfg.rates.odometry;
      ++frame_seq;
    }

    // VI-sensor IMU pair, merged at the gyro rate (feeds the odometry
    // front-end in the real system; here its health is tracked in the
    // summary).
    while (next_gyro <= t + 1e-9) {
      const PlantState& s = plant.state();
      merger.push_gyro(next_gyro, Vec3(s.roll_rate, s.pitch_rate, s.yaw_rate));
      next_gyro += 1.0 / kViGyroRate;
    }
    while (next_accel <= t + 1e-9) {
      merger.push_accel(next_accel, plant.acceleration() +
                                        Vec3(0.0, 0.0, params.gravity));
      next_accel += 1.0 / kViAccelRate;
    }
    merger.drain();

    if (k > 0)
      obs = observer_predict(obs, last_input, cfg.observer_params, cfg.observer,
                             dt_ctrl, fused.attitude().yaw);
    ObserverMeasurement obs_z;
    obs_z.p = fused.position();
    obs_z.v = fused.velocity();
    obs_z.roll = fused.attitude().roll;
    obs_z.pitch = fused.attitude().pitch;
    obs = observer_update(obs, obs_z, cfg.observer);
    const Vec3 f_est = external_force(obs).first;

    const StateVector estimate{fused.position(), fused.velocity(),
                               fused.attitude()};
    const ControlInput input = controller.step(estimate, sampler.fn, t, f_est);
    const ActuatorCommand cmd = to_actuator_command(input, act, params);

    RunRecord rec;
    rec.t = t;
    rec.truth = StateVector{plant.state().p, plant.state().v,
                            plant.state().attitude};
    rec.estimate = estimate;
    rec.reference = sampler.fn(t);
    rec.input = input;
    rec.f_ext_estimate = f_est;
    rec.wind_truth = plant.state().wind_force;
    log.records.push_back(rec);

    if (!rec.truth.all_finite() || !rec.estimate.all_finite())
      throw NumericalAbort("non-finite state at t=" + std::to_string(t),
                           dump_tail(log.records));

    for (int i = 0; i < n_sub; ++i) plant.step(cmd, dt_plant);
    last_input = input;
  }

  merger.finalize();
  log.summary.timesync_matched = matcher.matched_count();
  log.summary.timesync_dropped = matcher.dropped_images() + matcher.dropped_syncs();
  log.summary.imu_merged = merger.emitted_count();
  log.summary.imu_dropped = merger.dropped_gyros();
  log.summary.observer_gated = obs.gate_count;
  return log;
}

}  // namespace

RunLog run_scenario(const ScenarioConfig& cfg) {
  if (cfg.scenario == ScenarioKind::SysidSweep) {
    RunLog log;
    run_sysid_engine(cfg, &log, nullptr);
    return log;
  }
  return run_closed_loop(cfg);
}

FlightLog run_sysid_scenario_log(const ScenarioConfig& cfg) {
  FlightLog log;
  run_sysid_engine(cfg, nullptr, &log);
  return log;
}

RmsReport rms_metrics(const RunLog& log, MetricKind kind, double window_begin,
                      double window_end) {
  if (!(window_end > window_begin))
    throw std::invalid_argument("rms_metrics: empty evaluation window");

  double sum_x = 0, sum_y = 0, sum_z = 0;
  double sum_roll = 0, sum_pitch = 0, sum_yaw = 0;
  std::size_t count = 0;
  for (const auto& r : log.records) {
    if (r.t < window_begin - 1e-9 || r.t > window_end + 1e-9) continue;
    Vec3 dp;
    double droll, dpitch, dyaw;
    if (kind == MetricKind::Control) {
      dp = r.truth.p - r.reference.p;
      droll = wrap_angle(r.truth.attitude.roll);
      dpitch = wrap_angle(r.truth.attitude.pitch);
      dyaw = wrap_angle(r.truth.attitude.yaw - r.reference.yaw);
    } else {
      dp = r.truth.p - r.estimate.p;
      droll = wrap_angle(r.truth.attitude.roll - r.estimate.attitude.roll);
      dpitch = wrap_angle(r.truth.attitude.pitch - r.estimate.attitude.pitch);
      dyaw = wrap_angle(r.truth.attitude.yaw - r.estimate.attitude.yaw);
    }
    sum_x += dp.x() * dp.x();
    sum_y += dp.y() * dp.y();
    sum_z += dp.z() * dp.z();
    sum_roll += droll * droll;
    sum_pitch += dpitch * dpitch;
    sum_yaw += dyaw * dyaw;
    ++count;
  }
  if (count == 0)
    throw std::invalid_argument("rms_metrics: no records in evaluation window");

  const double n = static_cast<double>(count);
  constexpr double kRad2Deg = 180.0 / M_PI;
  RmsReport report;
  report.x = std::sqrt(sum_x / n);
  report.y = std::sqrt(sum_y / n);
  report.z = std::sqrt(sum_z / n);
  report.pose = std::sqrt((sum_x + sum_y + sum_z) / n);
  report.roll_deg = std::sqrt(sum_roll / n) * kRad2Deg;
  report.pitch_deg = std::sqrt(sum_pitch / n) * kRad2Deg;
  report.yaw_deg = std::sqrt(sum_yaw / n) * kRad2Deg;
  report.window_begin = window_begin;
  report.window_end = window_end;
  return report;
}

double drift_metric(const RunLog& log) {
  if (log.records.empty()) throw std::invalid_argument("drift_metric: empty log");
  const double path = log.path_length();
  if (!(path > 1e-9)) throw std::invalid_argument("drift_metric: zero path length");
  const auto& last = log.records.back();
  return (last.estimate.p - last.truth.p).norm() / path;
}

namespace {

void append_report(std::ostream& out, const std::string& prefix,
                   const RmsReport& r) {
  out << prefix << ".pose=" << csv::from_double(r.pose) << "\n"
      << prefix << ".x=" << csv::from_double(r.x) << "\n"
      << prefix << ".y=" << csv::from_double(r.y) << "\n"
      << prefix << ".z=" << csv::from_double(r.z) << "\n"
      << prefix << ".roll_deg=" << csv::from_double(r.roll_deg) << "\n"
      << prefix << ".pitch_deg=" << csv::from_double(r.pitch_deg) << "\n"
      << prefix << ".yaw_deg=" << csv::from_double(r.yaw_deg) << "\n"
      << prefix << ".window_begin=" << csv::from_double(r.window_begin) << "\n"
      << prefix << ".window_end=" << csv::from_double(r.window_end) << "\n";
}

}  // namespace

std::string report_text(const RmsReport& control, const RmsReport& estimation,
                        double drift, const RunSummary& summary) {
  std::ostringstream out;
  append_report(out, "control", control);
  append_report(out, "estimation", estimation);
  out << "drift=" << csv::from_double(drift) << "\n";
  out << "summary.timesync_matched=" << summary.timesync_matched << "\n";
  out << "summary.timesync_dropped=" << summary.timesync_dropped << "\n";
  out << "summary.imu_merged=" << summary.imu_merged << "\n";
  out << "summary.imu_dropped=" << summary.imu_dropped << "\n";
  out << "summary.observer_gated=" << summary.observer_gated << "\n";
  return out.str();
}

void export_run(const RunLog& log, const RmsReport& control,
                const RmsReport& estimation, double drift,
                const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + dir + ": " +
                             ec.message());
  log.save_csv(dir + "/runlog.csv");
  std::ofstream report(dir + "/report.txt");
  if (!report) throw std::runtime_error("cannot write report: " + dir + "/report.txt");
  report << report_text(control, estimation, drift, log.summary);
}

}  // namespace mavctl
