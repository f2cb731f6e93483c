#include "mavctl/trajectory.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mavctl/csv.hpp"

namespace mavctl {

PolySegment::PolySegment(const Eigen::Matrix<double, 6, 4>& coefficients,
                         double duration)
    : coeffs_(coefficients), duration_(duration) {
  if (!(duration > 0.0))
    throw std::invalid_argument("PolySegment: duration must be positive");
}

double PolySegment::eval(int axis, double t, int derivative) const {
  double value = 0.0;
  for (int p = 5; p >= derivative; --p) {
    double factor = 1.0;
    for (int d = 0; d < derivative; ++d) factor *= static_cast<double>(p - d);
    value = value * t + factor * coeffs_(p, axis);
  }
  return value;
}

ReferenceSample PolySegment::sample(double t) const {
  ReferenceSample s;
  for (int axis = 0; axis < 3; ++axis) {
    s.p[axis] = eval(axis, t, 0);
    s.v[axis] = eval(axis, t, 1);
    s.a[axis] = eval(axis, t, 2);
  }
  s.yaw = wrap_angle(eval(3, t, 0));
  s.yaw_rate = eval(3, t, 1);
  return s;
}

namespace {

// Quintic coefficients for scalar boundary conditions over [0, T].
Eigen::Matrix<double, 6, 1> quintic_axis(double p0, double v0, double a0,
                                         double p1, double v1, double a1,
                                         double T) {
  Eigen::Matrix<double, 6, 1> c;
  c[0] = p0;
  c[1] = v0;
  c[2] = a0 / 2.0;
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  Eigen::Matrix3d m;
  m << T3, T4, T5,
       3 * T2, 4 * T3, 5 * T4,
       6 * T, 12 * T2, 20 * T3;
  Eigen::Vector3d rhs(p1 - (c[0] + c[1] * T + c[2] * T2),
                      v1 - (c[1] + 2 * c[2] * T),
                      a1 - 2 * c[2]);
  const Eigen::Vector3d tail = m.fullPivLu().solve(rhs);
  c[3] = tail[0];
  c[4] = tail[1];
  c[5] = tail[2];
  return c;
}

}  // namespace

PolySegment quintic_segment(const MotionState& start, const MotionState& end,
                            double duration, double yaw0, double yaw1) {
  if (!(duration > 0.0))
    throw std::invalid_argument("quintic_segment: duration must be positive");
  Eigen::Matrix<double, 6, 4> coeffs;
  for (int axis = 0; axis < 3; ++axis)
    coeffs.col(axis) = quintic_axis(start.p[axis], start.v[axis], start.a[axis],
                                    end.p[axis], end.v[axis], end.a[axis],
                                    duration);
  // Yaw takes the short way around with zero end rates.
  const double dyaw = wrap_angle(yaw1 - yaw0);
  coeffs.col(3) = quintic_axis(yaw0, 0.0, 0.0, yaw0 + dyaw, 0.0, 0.0, duration);
  return PolySegment(coeffs, duration);
}

ReferenceSample ReferenceTrajectory::sample(double t) const {
  if (t < 0.0) throw std::invalid_argument("trajectory sample time before start");
  if (t > duration()) {
    ReferenceSample s = sample_at(duration());
    s.v.setZero();
    s.a.setZero();
    s.yaw_rate = 0.0;
    return s;
  }
  return sample_at(t);
}

double ReferenceTrajectory::path_length(int samples) const {
  const double T = duration();
  const double h = T / samples;
  double length = 0.0;
  Vec3 prev = sample_at(0.0).p;
  for (int i = 1; i <= samples; ++i) {
    const Vec3 next = sample_at(i * h).p;
    length += (next - prev).norm();
    prev = next;
  }
  return length;
}

PiecewiseTrajectory::PiecewiseTrajectory(std::vector<PolySegment> segments)
    : segments_(std::move(segments)) {
  if (segments_.empty())
    throw std::invalid_argument("PiecewiseTrajectory: no segments");
  start_times_.reserve(segments_.size());
  for (const auto& seg : segments_) {
    start_times_.push_back(total_duration_);
    total_duration_ += seg.duration();
  }
}

ReferenceSample PiecewiseTrajectory::sample_at(double t) const {
  auto it = std::upper_bound(start_times_.begin(), start_times_.end(), t);
  const std::size_t idx =
      it == start_times_.begin() ? 0 : static_cast<std::size_t>(it - start_times_.begin() - 1);
  const double local = std::min(t - start_times_[idx], segments_[idx].duration());
  return segments_[idx].sample(local);
}

PiecewiseTrajectory PiecewiseTrajectory::from_waypoints(
    const std::vector<Waypoint>& wps) {
  if (wps.size() < 2)
    throw std::invalid_argument("from_waypoints: need at least 2 waypoints");
  std::vector<PolySegment> segments;
  segments.reserve(wps.size() - 1);
  for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
    const double T = wps[i + 1].t - wps[i].t;
    if (!(T > 0.0))
      throw std::invalid_argument("from_waypoints: times must strictly increase");
    MotionState a, b;
    a.p = wps[i].p;
    b.p = wps[i + 1].p;
    segments.push_back(quintic_segment(a, b, T, wps[i].yaw, wps[i + 1].yaw));
  }
  return PiecewiseTrajectory(std::move(segments));
}

std::vector<PiecewiseTrajectory::Waypoint> PiecewiseTrajectory::load_waypoints_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open waypoint file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "t,x,y,z,yaw")
    throw std::runtime_error("waypoint header mismatch in " + path);
  std::vector<Waypoint> wps;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() != 5)
      throw std::runtime_error("waypoint row with wrong field count in " + path);
    Waypoint w;
    w.t = csv::to_double(fields[0]);
    w.p = Vec3(csv::to_double(fields[1]), csv::to_double(fields[2]),
               csv::to_double(fields[3]));
    w.yaw = csv::to_double(fields[4]);
    wps.push_back(w);
  }
  return wps;
}

Figure8Trajectory::Figure8Trajectory(double width, double height_amp,
                                     double period, bool yaw_follow, int laps,
                                     const Vec3& center)
    : half_width_(width / 2.0),
      height_amp_(height_amp),
      period_(period),
      yaw_follow_(yaw_follow),
      laps_(laps),
      center_(center) {
  if (!(width > 0.0 && period > 0.0 && laps >= 1))
    throw std::invalid_argument("Figure8Trajectory: parameters must be positive");
  if (height_amp < 0.0)
    throw std::invalid_argument("Figure8Trajectory: height amplitude negative");

  constexpr int kProbe = 8192;
  Vec3 prev = sample_at(0.0).p;
  for (int i = 1; i <= kProbe; ++i) {
    const double t = period_ * static_cast<double>(i) / kProbe;
    const ReferenceSample s = sample_at(t);
    lap_length_ += (s.p - prev).norm();
    prev = s.p;
    v_max_ = std::max(v_max_, s.v.norm());
    a_max_ = std::max(a_max_, s.a.norm());
  }
}

double Figure8Trajectory::duration() const { return period_ * laps_; }

ReferenceSample Figure8Trajectory::sample_at(double t) const {
  const double w = 2.0 * M_PI / period_;
  const double s1 = std::sin(w * t), c1 = std::cos(w * t);
  const double s2 = std::sin(2.0 * w * t), c2 = std::cos(2.0 * w * t);

  ReferenceSample out;
  out.p = center_ + Vec3(half_width_ * s1, 0.5 * half_width_ * s2, height_amp_ * s1);
  out.v = Vec3(half_width_ * w * c1, half_width_ * w * c2, height_amp_ * w * c1);
  out.a = Vec3(-half_width_ * w * w * s1, -2.0 * half_width_ * w * w * s2,
               -height_amp_ * w * w * s1);
  if (yaw_follow_) {
    out.yaw = std::atan2(out.v.y(), out.v.x());
    const double speed2 = out.v.x() * out.v.x() + out.v.y() * out.v.y();
    out.yaw_rate =
        speed2 > 1e-12 ? (out.v.x() * out.a.y() - out.v.y() * out.a.x()) / speed2 : 0.0;
  }
  return out;
}

FeasibilityReport check_feasibility(const ReferenceTrajectory& traj, double v_max,
                                    double a_max, int samples) {
  FeasibilityReport report;
  const double T = traj.duration();
  const double h = T / samples;

  auto scan = [&](FeasibilityViolation::Kind kind, double limit,
                  auto magnitude) {
    bool open = false;
    FeasibilityViolation current;
    for (int i = 0; i <= samples; ++i) {
      const double t = i * h;
      const double value = magnitude(traj.sample_at(t));
      if (value > limit) {
        if (!open) {
          open = true;
          current = FeasibilityViolation{t, t, kind, value};
        }
        current.t_end = t;
        current.peak = std::max(current.peak, value);
      } else if (open) {
        report.violations.push_back(current);
        open = false;
      }
    }
    if (open) report.violations.push_back(current);
  };

  scan(FeasibilityViolation::Kind::Velocity, v_max,
       [](const ReferenceSample& s) { return s.v.norm(); });
  scan(FeasibilityViolation::Kind::Acceleration, a_max,
       [](const ReferenceSample& s) { return s.a.norm(); });
  report.feasible = report.violations.empty();
  return report;
}

}  // namespace mavctl
