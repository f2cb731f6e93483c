#pragma once

#include <Eigen/Core>

namespace mavctl {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// 3x3 orthonormal matrix with determinant +1 (checked by is_rotation()).
using RotationMatrix = Mat3;

/// Attitude as roll/pitch/yaw about body x/y/z, ZYX composition order.
/// Roll and pitch stay within (-pi/2, pi/2) for every state this stack
/// produces; yaw is kept in (-pi, pi].
struct EulerAngles {
  double roll{0.0};
  double pitch{0.0};
  double yaw{0.0};
};

/// The five right-handed frames used across the stack.
enum class Frame { World, Odometry, Body, Camera, ViImu };

const char* frame_name(Frame f);

/// Rigid transform taking points expressed in `from_frame` to `to_frame`.
struct FrameTransform {
  RotationMatrix rotation{RotationMatrix::Identity()};
  Vec3 translation{Vec3::Zero()};
  Frame from_frame{Frame::Body};
  Frame to_frame{Frame::World};

  Vec3 apply(const Vec3& point) const { return rotation * point + translation; }
  FrameTransform inverse() const;
  /// Composition: (this ∘ other) maps other.from_frame to this->to_frame.
  FrameTransform compose(const FrameTransform& other) const;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// R = Rz(yaw) * Ry(pitch) * Rx(roll); always a member of SO(3).
RotationMatrix rotation_from_euler(const EulerAngles& angles);

/// Inverse of rotation_from_euler for pitch within (-pi/2, pi/2).
EulerAngles euler_from_rotation(const RotationMatrix& r);

/// True if r is orthonormal and det(r) = +1 within `tol`.
bool is_rotation(const RotationMatrix& r, double tol = 1e-9);

/// One attitude/rate/acceleration triple as reported by an autopilot IMU.
struct ImuAttitudeSample {
  EulerAngles attitude;
  Vec3 rates{Vec3::Zero()};   // rad/s
  Vec3 accel{Vec3::Zero()};   // m/s^2
};

/// Re-expresses an NED-convention autopilot sample in the z-up body frame
/// (rotation by pi about the x-axis). The operation is an involution.
ImuAttitudeSample ned_to_body_alignment(const ImuAttitudeSample& sample);

}  // namespace mavctl
