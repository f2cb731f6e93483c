#include "mavctl/sysid.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mavctl/csv.hpp"
#include "mavctl/least_squares.hpp"

namespace mavctl {

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::Roll: return "phi";
    case Channel::Pitch: return "theta";
    case Channel::YawRate: return "psidot";
    case Channel::VerticalVelocity: return "vz";
  }
  return "?";
}

std::optional<Channel> channel_from_name(const std::string& name) {
  if (name == "phi") return Channel::Roll;
  if (name == "theta") return Channel::Pitch;
  if (name == "psidot") return Channel::YawRate;
  if (name == "vz") return Channel::VerticalVelocity;
  return std::nullopt;
}

double ActuatorCommand::get(Channel c) const {
  switch (c) {
    case Channel::Roll: return c_phi;
    case Channel::Pitch: return c_theta;
    case Channel::YawRate: return c_psi_dot;
    case Channel::VerticalVelocity: return c_vz;
  }
  return 0.0;
}

void ActuatorCommand::set(Channel c, double value) {
  switch (c) {
    case Channel::Roll: c_phi = value; break;
    case Channel::Pitch: c_theta = value; break;
    case Channel::YawRate: c_psi_dot = value; break;
    case Channel::VerticalVelocity: c_vz = value; break;
  }
}

double ScaleParams::get(Channel c) const {
  switch (c) {
    case Channel::Roll: return lambda_phi;
    case Channel::Pitch: return lambda_theta;
    case Channel::YawRate: return lambda_psi_dot;
    case Channel::VerticalVelocity: return lambda_vz;
  }
  return 0.0;
}

void ScaleParams::set(Channel c, double value) {
  switch (c) {
    case Channel::Roll: lambda_phi = value; break;
    case Channel::Pitch: lambda_theta = value; break;
    case Channel::YawRate: lambda_psi_dot = value; break;
    case Channel::VerticalVelocity: lambda_vz = value; break;
  }
}

double TrimOffset::get(Channel c) const {
  switch (c) {
    case Channel::Roll: return phi;
    case Channel::Pitch: return theta;
    case Channel::YawRate: return psi_dot;
    case Channel::VerticalVelocity: return vz;
  }
  return 0.0;
}

void TrimOffset::set(Channel c, double value) {
  switch (c) {
    case Channel::Roll: phi = value; break;
    case Channel::Pitch: theta = value; break;
    case Channel::YawRate: psi_dot = value; break;
    case Channel::VerticalVelocity: vz = value; break;
  }
}

void FlightLog::validate() const {
  if (records.size() < 2)
    throw std::invalid_argument("flight log needs at least 2 records");
  for (std::size_t i = 1; i < records.size(); ++i)
    if (!(records[i].t > records[i - 1].t))
      throw std::invalid_argument("flight log timestamps must strictly increase");
}

double FlightLog::duration() const {
  if (records.empty()) return 0.0;
  return records.back().t - records.front().t;
}

double FlightLog::mean_dt() const {
  validate();
  return duration() / static_cast<double>(records.size() - 1);
}

std::vector<double> FlightLog::command_series(Channel c) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.command.get(c));
  return out;
}

std::vector<double> FlightLog::response_series(Channel c) const {
  std::vector<double> out;
  switch (c) {
    case Channel::Roll:
      for (const auto& r : records) out.push_back(r.phi);
      break;
    case Channel::Pitch:
      for (const auto& r : records) out.push_back(r.theta);
      break;
    case Channel::YawRate:
      for (std::size_t i = 0; i + 1 < records.size(); ++i) {
        const double dt = records[i + 1].t - records[i].t;
        out.push_back(wrap_angle(records[i + 1].psi - records[i].psi) / dt);
      }
      break;
    case Channel::VerticalVelocity:
      for (const auto& r : records) out.push_back(r.v.z());
      break;
  }
  return out;
}

namespace {
constexpr const char* kFlightLogHeader =
    "t,c_phi,c_theta,c_psidot,c_vz,phi,theta,psi,px,py,pz,vx,vy,vz_meas";
}

FlightLog FlightLog::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open flight log: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kFlightLogHeader)
    throw std::runtime_error("flight log header mismatch in " + path);
  FlightLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() != 14)
      throw std::runtime_error("flight log row with wrong field count in " + path);
    FlightRecord r;
    r.t = csv::to_double(fields[0]);
    r.command.c_phi = csv::to_double(fields[1]);
    r.command.c_theta = csv::to_double(fields[2]);
    r.command.c_psi_dot = csv::to_double(fields[3]);
    r.command.c_vz = csv::to_double(fields[4]);
    r.phi = csv::to_double(fields[5]);
    r.theta = csv::to_double(fields[6]);
    r.psi = csv::to_double(fields[7]);
    r.p = Vec3(csv::to_double(fields[8]), csv::to_double(fields[9]),
               csv::to_double(fields[10]));
    r.v = Vec3(csv::to_double(fields[11]), csv::to_double(fields[12]),
               csv::to_double(fields[13]));
    log.records.push_back(r);
  }
  log.validate();
  return log;
}

void FlightLog::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write flight log: " + path);
  out << kFlightLogHeader << "\n";
  for (const auto& r : records) {
    out << csv::from_double(r.t) << ',' << csv::from_double(r.command.c_phi)
        << ',' << csv::from_double(r.command.c_theta) << ','
        << csv::from_double(r.command.c_psi_dot) << ','
        << csv::from_double(r.command.c_vz) << ',' << csv::from_double(r.phi)
        << ',' << csv::from_double(r.theta) << ',' << csv::from_double(r.psi)
        << ',' << csv::from_double(r.p.x()) << ',' << csv::from_double(r.p.y())
        << ',' << csv::from_double(r.p.z()) << ',' << csv::from_double(r.v.x())
        << ',' << csv::from_double(r.v.y()) << ','
        << csv::from_double(r.v.z()) << "\n";
  }
}

double estimate_scale(const FlightLog& log, Channel channel) {
  log.validate();
  const auto u = log.command_series(channel);
  const auto z = log.response_series(channel);
  const std::size_t n = std::min(u.size(), z.size());
  double uu = 0.0, zu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    uu += u[i] * u[i];
    zu += z[i] * u[i];
  }
  if (uu <= 1e-12)
    throw std::runtime_error(std::string("estimate_scales: channel ") +
                             channel_name(channel) + " not excited");
  const double lambda = zu / uu;
  if (!(lambda > 0.0))
    throw std::runtime_error(std::string("estimate_scales: channel ") +
                             channel_name(channel) +
                             " yields non-positive scale");
  return lambda;
}

ScaleParams estimate_scales(const FlightLog& log) {
  ScaleParams out;
  for (Channel c : {Channel::Roll, Channel::Pitch, Channel::YawRate,
                    Channel::VerticalVelocity})
    out.set(c, estimate_scale(log, c));
  return out;
}

std::vector<double> simulate_first_order(const FirstOrderModel& model,
                                         std::span<const double> u, double dt,
                                         double y0) {
  const double a = std::exp(-dt / model.tau);
  const double b = model.k * (1.0 - a);
  std::vector<double> y(u.size());
  double state = y0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    y[i] = state;
    state = a * state + b * u[i];
  }
  return y;
}

std::vector<double> simulate_second_order(const SecondOrderModel& model,
                                          std::span<const double> u, double dt,
                                          double y0, double ydot0) {
  // Exact ZOH discretization through the augmented matrix exponential.
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 1) = 1.0;
  m(1, 0) = -model.omega * model.omega;
  m(1, 1) = -2.0 * model.zeta * model.omega;
  m(1, 2) = model.k * model.omega * model.omega;
  const Eigen::Matrix3d em = (m * dt).exp();
  const Eigen::Matrix2d ad = em.topLeftCorner<2, 2>();
  const Eigen::Vector2d bd = em.topRightCorner<2, 1>();

  std::vector<double> y(u.size());
  Eigen::Vector2d state(y0, ydot0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    y[i] = state[0];
    state = ad * state + bd * u[i];
  }
  return y;
}

namespace {

void check_fit_input(std::span<const double> u, std::span<const double> y) {
  if (u.size() != y.size())
    throw std::invalid_argument("fit: input and output lengths differ");
  if (u.size() < 10) throw std::invalid_argument("fit: need at least 10 samples");
  const double u0 = u.front();
  const bool excited =
      std::any_of(u.begin(), u.end(), [&](double v) { return v != u0; });
  if (!excited) throw std::runtime_error("fit: insufficient excitation");
}

[[noreturn]] void throw_no_convergence(double best_cost, std::size_t n) {
  std::ostringstream msg;
  msg << "fit did not converge; best residual rms "
      << std::sqrt(best_cost / static_cast<double>(n));
  throw std::runtime_error(msg.str());
}

}  // namespace

FirstOrderModel fit_first_order(std::span<const double> u,
                                std::span<const double> y, double dt) {
  check_fit_input(u, y);
  if (!(dt > 0.0)) throw std::invalid_argument("fit: dt must be positive");

  const double y0 = y.front();
  const auto residual = [&](const Eigen::VectorXd& theta) {
    const FirstOrderModel m{std::exp(theta[0]), std::exp(theta[1])};
    const auto sim = simulate_first_order(m, u, dt, y0);
    Eigen::VectorXd r(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = y[i] - sim[i];
    return r;
  };

  static constexpr double kTauGrid[] = {0.05, 0.1, 0.2, 0.5, 1.0};
  LeastSquaresResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (double tau0 : kTauGrid) {
    Eigen::VectorXd theta0(2);
    theta0 << std::log(1.0), std::log(tau0);
    const auto result = fit_least_squares(residual, theta0);
    if (result.converged && result.cost < best.cost) best = result;
  }
  if (!std::isfinite(best.cost)) throw_no_convergence(best.cost, y.size());
  return FirstOrderModel{std::exp(best.parameters[0]),
                         std::exp(best.parameters[1])};
}

SecondOrderModel fit_second_order(std::span<const double> u,
                                  std::span<const double> y, double dt) {
  check_fit_input(u, y);
  if (!(dt > 0.0)) throw std::invalid_argument("fit: dt must be positive");

  const double y0 = y.front();
  const double ydot_guess = (y[1] - y[0]) / dt;
  const auto residual = [&](const Eigen::VectorXd& theta) {
    const SecondOrderModel m{std::exp(theta[0]), std::exp(theta[1]),
                             std::exp(theta[2])};
    const auto sim = simulate_second_order(m, u, dt, y0, theta[3]);
    Eigen::VectorXd r(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = y[i] - sim[i];
    return r;
  };

  static constexpr double kOmegaGrid[] = {1.0, 2.5, 5.0, 10.0, 25.0};
  LeastSquaresResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (double omega0 : kOmegaGrid) {
    Eigen::VectorXd theta0(4);
    theta0 << std::log(1.0), std::log(0.7), std::log(omega0), ydot_guess;
    const auto result = fit_least_squares(residual, theta0);
    if (result.converged && result.cost < best.cost) best = result;
  }
  if (!std::isfinite(best.cost)) throw_no_convergence(best.cost, y.size());
  return SecondOrderModel{std::exp(best.parameters[0]),
                          std::exp(best.parameters[1]),
                          std::exp(best.parameters[2])};
}

std::variant<FirstOrderModel, SecondOrderModel> tf_to_params(
    double b0, std::optional<double> a1, double a0) {
  if (!(a0 > 0.0)) throw std::domain_error("tf_to_params: unstable denominator");
  if (!(b0 > 0.0)) throw std::domain_error("tf_to_params: non-positive gain");
  if (!a1) return FirstOrderModel{b0 / a0, 1.0 / a0};
  if (!(*a1 > 0.0)) throw std::domain_error("tf_to_params: unstable denominator");
  const double omega = std::sqrt(a0);
  return SecondOrderModel{b0 / a0, *a1 / (2.0 * omega), omega};
}

void tf_from_params(const FirstOrderModel& m, double& b0, double& a0) {
  a0 = 1.0 / m.tau;
  b0 = m.k / m.tau;
}

void tf_from_params(const SecondOrderModel& m, double& b0, double& a1,
                    double& a0) {
  a0 = m.omega * m.omega;
  a1 = 2.0 * m.zeta * m.omega;
  b0 = m.k * a0;
}

namespace {

Channel detect_swept_channel(const FlightLog& log) {
  Channel best = Channel::Roll;
  double best_var = -1.0;
  for (Channel c : {Channel::Roll, Channel::Pitch, Channel::YawRate,
                    Channel::VerticalVelocity}) {
    const auto u = log.command_series(c);
    const double mean =
        std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
    double var = 0.0;
    for (double v : u) var += (v - mean) * (v - mean);
    if (var > best_var) {
      best_var = var;
      best = c;
    }
  }
  return best;
}

struct HoldLevel {
  double command{0.0};
  bool quiet{true};
};

}  // namespace

DeadZone detect_dead_zone(const FlightLog& sweep, const DeadZoneOptions& options) {
  sweep.validate();
  const Channel channel = detect_swept_channel(sweep);
  const auto commands = sweep.command_series(channel);

  // Group into hold levels of constant command; motion is judged on the
  // trailing part of each hold so the previous level's transient dies out.
  std::vector<HoldLevel> levels;
  std::size_t start = 0;
  while (start < commands.size()) {
    std::size_t end = start + 1;
    while (end < commands.size() && commands[end] == commands[start]) ++end;
    const double t0 = sweep.records[start].t;
    const double t1 = sweep.records[end - 1].t;
    const double watch_from = t0 + options.settle_fraction * (t1 - t0);
    double motion = 0.0;
    std::optional<Vec3> v_ref;
    for (std::size_t i = start; i < end; ++i) {
      if (sweep.records[i].t < watch_from) continue;
      if (!v_ref) v_ref = sweep.records[i].v;
      motion = std::max(motion, (sweep.records[i].v - *v_ref).norm());
    }
    levels.push_back({commands[start], motion < options.motion_threshold});
    start = end;
  }

  // Deduplicate by command value; a level revisited loudly counts as loud.
  std::map<double, bool> quiet_by_command;
  bool any_loud = false;
  for (const auto& level : levels) {
    auto [it, inserted] = quiet_by_command.try_emplace(level.command, level.quiet);
    if (!inserted) it->second = it->second && level.quiet;
    any_loud = any_loud || !level.quiet;
  }
  if (!any_loud)
    throw std::runtime_error("detect_dead_zone: range not bracketed");

  DeadZone zone;
  for (auto it = quiet_by_command.lower_bound(0.0); it != quiet_by_command.end();
       ++it) {
    if (!it->second) break;
    zone.upper = it->first;
  }
  for (auto it = std::make_reverse_iterator(quiet_by_command.lower_bound(0.0));
       it != quiet_by_command.rend(); ++it) {
    if (it->first > 0.0) continue;
    if (!it->second) break;
    zone.lower = it->first;
  }
  return zone;
}

namespace {

double channel_velocity(const FlightLog& log, std::size_t i, Channel c) {
  const auto& r = log.records[i];
  switch (c) {
    case Channel::Roll: return r.v.y();
    case Channel::Pitch: return r.v.x();
    case Channel::YawRate: {
      if (i + 1 >= log.records.size()) return 0.0;
      const double dt = log.records[i + 1].t - r.t;
      return wrap_angle(log.records[i + 1].psi - r.psi) / dt;
    }
    case Channel::VerticalVelocity: return r.v.z();
  }
  return 0.0;
}

}  // namespace

TrimOffset estimate_trim(const FlightLog& hover, const TrimOptions& options) {
  hover.validate();
  if (hover.duration() < options.min_duration)
    throw std::runtime_error("estimate_trim: log shorter than required duration");

  TrimOffset out;
  for (Channel c : {Channel::Roll, Channel::Pitch, Channel::YawRate,
                    Channel::VerticalVelocity}) {
    const auto u = hover.command_series(c);
    const double span =
        *std::max_element(u.begin(), u.end()) - *std::min_element(u.begin(), u.end());
    if (span <= 0.0) {
      out.set(c, 0.0);  // channel held constant, nothing to estimate
      continue;
    }

    // Quadratic least squares of squared channel velocity vs command.
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    double min_speed = std::numeric_limits<double>::infinity();
    double min_speed_command = 0.0;
    for (std::size_t i = 0; i < hover.records.size(); ++i) {
      const double cmd = u[i];
      const double vel = channel_velocity(hover, i, c);
      const Eigen::Vector3d row(cmd * cmd, cmd, 1.0);
      ata += row * row.transpose();
      atb += row * (vel * vel);
      if (std::abs(vel) < min_speed) {
        min_speed = std::abs(vel);
        min_speed_command = cmd;
      }
    }
    const Eigen::Vector3d coeffs = ata.ldlt().solve(atb);
    double offset;
    if (coeffs[0] > 1e-12) {
      offset = -coeffs[1] / (2.0 * coeffs[0]);
      if (std::abs(offset) > options.max_offset) offset = min_speed_command;
    } else {
      offset = min_speed_command;
    }
    out.set(c, std::clamp(offset, -options.max_offset, options.max_offset));
  }
  return out;
}

}  // namespace mavctl
