#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mavctl/geometry.hpp"

namespace mavctl {

/// Transmitter channels in the order they appear in flight logs.
enum class Channel { Roll, Pitch, YawRate, VerticalVelocity };

const char* channel_name(Channel c);  // "phi", "theta", "psidot", "vz"
std::optional<Channel> channel_from_name(const std::string& name);

/// Unitless transmitter command counts, each within [-1024, 1024].
struct ActuatorCommand {
  double c_phi{0.0};
  double c_theta{0.0};
  double c_psi_dot{0.0};
  double c_vz{0.0};

  double get(Channel c) const;
  void set(Channel c, double value);
};

inline constexpr double kCommandLimit = 1024.0;

/// Per-channel count-to-SI scaling (rad, rad/s, m/s per count).
struct ScaleParams {
  double lambda_phi{8.65e-4};
  double lambda_theta{8.44e-4};
  double lambda_psi_dot{2.24e-3};
  double lambda_vz{2.65e-3};

  double get(Channel c) const;
  void set(Channel c, double value);
};

/// y(s)/u(s) = k / (tau*s + 1)
struct FirstOrderModel {
  double k{1.0};
  double tau{1.0};
};

/// y(s)/u(s) = k*omega^2 / (s^2 + 2*zeta*omega*s + omega^2)
struct SecondOrderModel {
  double k{1.0};
  double zeta{0.7};
  double omega{5.0};
};

/// Command interval around neutral that the autopilot ignores (counts).
struct DeadZone {
  double lower{0.0};  // <= 0
  double upper{0.0};  // >= 0

  bool contains(double command) const { return command >= lower && command <= upper; }
};

/// Per-channel neutral-point bias in counts.
struct TrimOffset {
  double phi{0.0};
  double theta{0.0};
  double psi_dot{0.0};
  double vz{0.0};

  double get(Channel c) const;
  void set(Channel c, double value);
};

struct FlightRecord {
  double t{0.0};
  ActuatorCommand command;
  double phi{0.0}, theta{0.0}, psi{0.0};  // rad
  Vec3 p{Vec3::Zero()};                   // m
  Vec3 v{Vec3::Zero()};                   // m/s
};

/// Time-ordered input/output records from a (real or simulated) flight.
struct FlightLog {
  std::vector<FlightRecord> records;

  void validate() const;  // strictly increasing t, >= 2 records
  double duration() const;
  double mean_dt() const;

  std::vector<double> command_series(Channel c) const;
  /// Measured response per channel: roll/pitch angle, yaw rate (finite
  /// difference of the wrapped heading; one sample shorter), or vertical
  /// velocity.
  std::vector<double> response_series(Channel c) const;

  static FlightLog load_csv(const std::string& path);
  void save_csv(const std::string& path) const;
};

/// Least-squares scale of one channel's response against its command:
/// lambda = sum(z*u)/sum(u^2). Throws std::runtime_error naming the channel
/// when it carries no excitation.
double estimate_scale(const FlightLog& log, Channel channel);

/// All four channels at once. Channels decouple, so this equals the
/// per-channel closed form.
ScaleParams estimate_scales(const FlightLog& log);

/// Exact zero-order-hold simulation of tau*y' = k*u - y from y(0) = y0.
std::vector<double> simulate_first_order(const FirstOrderModel& model,
                                         std::span<const double> u, double dt,
                                         double y0);

/// Exact zero-order-hold simulation of y'' + 2*zeta*omega*y' + omega^2*y =
/// k*omega^2*u from (y0, ydot0).
std::vector<double> simulate_second_order(const SecondOrderModel& model,
                                          std::span<const double> u, double dt,
                                          double y0, double ydot0);

/// Output-error fit of a first-order model by Gauss-Newton with a fixed
/// multi-start grid over tau. Deterministic.
FirstOrderModel fit_first_order(std::span<const double> u,
                                std::span<const double> y, double dt);

/// Output-error fit of a second-order model (multi-start over omega). The
/// initial rate is co-estimated as a nuisance parameter.
SecondOrderModel fit_second_order(std::span<const double> u,
                                  std::span<const double> y, double dt);

/// Converts printed transfer-function coefficients to canonical parameters:
/// b0/(s + a0) -> (k = b0/a0, tau = 1/a0);
/// b0/(s^2 + a1*s + a0) -> (k = b0/a0, zeta = a1/(2*sqrt(a0)), omega = sqrt(a0)).
/// Throws std::domain_error for unstable denominators or non-positive gain.
std::variant<FirstOrderModel, SecondOrderModel> tf_to_params(
    double b0, std::optional<double> a1, double a0);

void tf_from_params(const FirstOrderModel& m, double& b0, double& a0);
void tf_from_params(const SecondOrderModel& m, double& b0, double& a1, double& a0);

struct DeadZoneOptions {
  double motion_threshold{0.02};  // velocity change treated as motion, m/s
  double settle_fraction{0.5};    // leading part of each hold skipped
};

/// Dead-zone bounds from a staircase command sweep through neutral: the
/// outermost held command values whose velocity stays within the motion
/// threshold. Throws std::runtime_error("...not bracketed") when every level
/// is quiet.
DeadZone detect_dead_zone(const FlightLog& sweep, const DeadZoneOptions& options = {});

struct TrimOptions {
  double min_duration{5.0};  // s
  double max_offset{200.0};  // counts, sanity bound
};

/// Per-channel balancing point: command minimizing a quadratic fit of squared
/// channel velocity versus command, falling back to the command at minimum
/// observed |velocity| when the fit is not convex.
TrimOffset estimate_trim(const FlightLog& hover, const TrimOptions& options = {});

}  // namespace mavctl
