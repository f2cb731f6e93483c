#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mavctl/config.hpp"
#include "mavctl/fusion.hpp"
#include "mavctl/nmpc.hpp"
#include "mavctl/observer.hpp"
#include "mavctl/simulator.hpp"
#include "mavctl/trajectory.hpp"

namespace mavctl {

/// Raised when a closed-loop state goes non-finite; carries a dump of the
/// last records for diagnosis.
struct NumericalAbort : std::runtime_error {
  NumericalAbort(const std::string& message, std::string dump_text)
      : std::runtime_error(message), dump(std::move(dump_text)) {}
  std::string dump;
};

enum class ScenarioKind { Hover, Step, Trajectory, Figure8, SysidSweep };

const char* scenario_name(ScenarioKind kind);

struct RatesConfig {
  double plant{500.0};
  double control{50.0};
  double odometry{30.0};
  double imu{50.0};
  double sysid_log{100.0};
};

struct TimesyncConfig {
  double camera_offset{0.005};  // s, constant camera-IMU clock offset
  std::size_t buffer_size{32};
};

struct SysidSweepConfig {
  std::string mode{"deadzone"};  // deadzone | chirp
  Channel channel{Channel::Roll};
  double sweep_max{60.0};   // counts
  double sweep_step{5.0};   // counts
  double hold_time{2.0};    // s per level
};

struct ScenarioConfig {
  ScenarioKind scenario{ScenarioKind::Hover};
  double duration{60.0};
  std::uint64_t seed{1};

  bool wind_enabled{false};
  WindModel wind{Vec3(2.5, 0.0, 0.0), 0.4, 1.5, 0};

  VehicleParams vehicle;
  ActuatorModel actuators;
  OdometryEmulatorConfig odometry;
  ImuNoiseConfig imu;
  FusionNoise fusion;
  ObserverNoise observer;
  ObserverParams observer_params;
  ControllerSettings controller;
  RatesConfig rates;
  TimesyncConfig timesync;
  SysidSweepConfig sysid;

  Vec3 hover_position{0.0, 0.0, 1.0};
  Vec3 step_offset{1.0, 0.0, 0.0};
  double step_time{5.0};

  double fig8_width{3.36};
  double fig8_height{0.4};
  double fig8_period{9.07};
  bool fig8_yaw_follow{false};

  std::string waypoint_file;
  double eval_window_begin{-1.0};  // -1: full log
  double eval_window_end{-1.0};
  std::string noise_preset{"none"};  // none | indoor | outdoor
  std::string out_dir;

  static ScenarioConfig from_config(const Config& cfg);
  static ScenarioConfig from_file(const std::string& path);
};

struct RunRecord {
  double t{0.0};
  StateVector truth;
  StateVector estimate;
  ReferenceSample reference;
  ControlInput input;
  Vec3 f_ext_estimate{Vec3::Zero()};
  Vec3 wind_truth{Vec3::Zero()};
};

struct RunSummary {
  std::size_t timesync_matched{0};
  std::size_t timesync_dropped{0};
  std::size_t imu_merged{0};
  std::size_t imu_dropped{0};
  std::size_t observer_gated{0};
};

struct RunLog {
  std::vector<RunRecord> records;
  RunSummary summary;

  double duration() const;
  /// Integrated truth path length.
  double path_length() const;

  void save_csv(const std::string& path) const;
  static RunLog load_csv(const std::string& path);
};

/// Deterministic closed-loop run (or open-loop command script for the sysid
/// scenario). Writes nothing; see export_run.
RunLog run_scenario(const ScenarioConfig& cfg);

/// The generated command log of a sysid scenario (same run as run_scenario,
/// logged at the sysid rate as a FlightLog).
FlightLog run_sysid_scenario_log(const ScenarioConfig& cfg);

enum class MetricKind { Control, Estimation };

struct RmsReport {
  double pose{0.0};  // m, 3-D RMS
  double x{0.0}, y{0.0}, z{0.0};  // m
  double roll_deg{0.0}, pitch_deg{0.0}, yaw_deg{0.0};
  double window_begin{0.0}, window_end{0.0};
};

/// RMS over the records inside [window_begin, window_end]. Control compares
/// truth against the reference; estimation compares truth against the
/// estimate. Angle errors are wrapped and reported in degrees.
RmsReport rms_metrics(const RunLog& log, MetricKind kind, double window_begin,
                      double window_end);

/// Final estimate-vs-truth offset divided by the integrated truth path.
double drift_metric(const RunLog& log);

std::string report_text(const RmsReport& control, const RmsReport& estimation,
                        double drift, const RunSummary& summary);

/// Writes <dir>/runlog.csv and <dir>/report.txt.
void export_run(const RunLog& log, const RmsReport& control,
                const RmsReport& estimation, double drift,
                const std::string& dir);

}  // namespace mavctl
