#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mavctl/geometry.hpp"

namespace mavctl {

/// Boundary condition for one polynomial segment axis set.
struct MotionState {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  Vec3 a{Vec3::Zero()};
};

/// Flat reference sample consumed by the position controller.
struct ReferenceSample {
  Vec3 p{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  Vec3 a{Vec3::Zero()};
  double yaw{0.0};
  double yaw_rate{0.0};
};

/// Quintic polynomial per axis (x, y, z, yaw) over [0, duration].
class PolySegment {
 public:
  PolySegment(const Eigen::Matrix<double, 6, 4>& coefficients, double duration);

  double duration() const { return duration_; }
  ReferenceSample sample(double t) const;
  /// Value of one axis derivative (order 0..2 used here, higher allowed).
  double eval(int axis, double t, int derivative) const;

 private:
  Eigen::Matrix<double, 6, 4> coeffs_;  // rows: powers t^0..t^5
  double duration_;
};

/// Unique quintic meeting position/velocity/acceleration at both ends of each
/// translation axis; yaw travels from yaw0 to yaw1 with zero end rates.
PolySegment quintic_segment(const MotionState& start, const MotionState& end,
                            double duration, double yaw0 = 0.0, double yaw1 = 0.0);

/// Time-parametrized reference path. Sampling past the end holds the terminal
/// state (hover hand-off); sampling before 0 throws std::invalid_argument.
class ReferenceTrajectory {
 public:
  virtual ~ReferenceTrajectory() = default;
  virtual double duration() const = 0;
  virtual ReferenceSample sample_at(double t) const = 0;

  ReferenceSample sample(double t) const;

  /// Dense-sampled integral of speed over [0, duration].
  double path_length(int samples = 4096) const;
};

class PiecewiseTrajectory final : public ReferenceTrajectory {
 public:
  explicit PiecewiseTrajectory(std::vector<PolySegment> segments);

  double duration() const override { return total_duration_; }
  ReferenceSample sample_at(double t) const override;
  std::size_t segment_count() const { return segments_.size(); }

  /// Builds rest-to-rest quintic hops between waypoints (t, x, y, z, yaw).
  struct Waypoint {
    double t{0.0};
    Vec3 p{Vec3::Zero()};
    double yaw{0.0};
  };
  static PiecewiseTrajectory from_waypoints(const std::vector<Waypoint>& wps);
  static std::vector<Waypoint> load_waypoints_csv(const std::string& path);

 private:
  std::vector<PolySegment> segments_;
  std::vector<double> start_times_;
  double total_duration_{0.0};
};

/// Gerono-lemniscate figure-8 centered on `center`:
///   x = (width/2) sin(2 pi t/T), y = (width/4) sin(4 pi t/T),
///   z = height_amp * sin(2 pi t/T), optional tangent-following yaw.
class Figure8Trajectory final : public ReferenceTrajectory {
 public:
  Figure8Trajectory(double width, double height_amp, double period,
                    bool yaw_follow, int laps = 1,
                    const Vec3& center = Vec3::Zero());

  double duration() const override;
  ReferenceSample sample_at(double t) const override;

  double reported_v_max() const { return v_max_; }
  double reported_a_max() const { return a_max_; }
  double reported_path_length() const { return lap_length_ * laps_; }

 private:
  double half_width_, height_amp_, period_;
  bool yaw_follow_;
  int laps_;
  Vec3 center_;
  double v_max_{0.0}, a_max_{0.0}, lap_length_{0.0};
};

struct FeasibilityViolation {
  double t_begin{0.0};
  double t_end{0.0};
  enum class Kind { Velocity, Acceleration } kind{Kind::Velocity};
  double peak{0.0};
};

struct FeasibilityReport {
  bool feasible{true};
  std::vector<FeasibilityViolation> violations;
};

/// Dense-samples the trajectory derivatives and flags limit violations with
/// the time windows in which they occur.
FeasibilityReport check_feasibility(const ReferenceTrajectory& traj, double v_max,
                                    double a_max, int samples = 10000);

}  // namespace mavctl
