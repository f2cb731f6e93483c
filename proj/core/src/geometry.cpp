#include "mavctl/geometry.hpp"

#include <Eigen/LU>
#include <cmath>

namespace mavctl {

const char* frame_name(Frame f) {
  switch (f) {
    case Frame::World: return "W";
    case Frame::Odometry: return "O";
    case Frame::Body: return "B";
    case Frame::Camera: return "C";
    case Frame::ViImu: return "V";
  }
  return "?";
}

FrameTransform FrameTransform::inverse() const {
  FrameTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(rotation.transpose() * translation);
  out.from_frame = to_frame;
  out.to_frame = from_frame;
  return out;
}

FrameTransform FrameTransform::compose(const FrameTransform& other) const {
  FrameTransform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  out.from_frame = other.from_frame;
  out.to_frame = to_frame;
  return out;
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;  // remainder returns [-pi, pi]; fold -pi to +pi
  return a;
}

RotationMatrix rotation_from_euler(const EulerAngles& angles) {
  const double cr = std::cos(angles.roll), sr = std::sin(angles.roll);
  const double cp = std::cos(angles.pitch), sp = std::sin(angles.pitch);
  const double cy = std::cos(angles.yaw), sy = std::sin(angles.yaw);
  RotationMatrix r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp,     cp * sr,                cp * cr;
  return r;
}

EulerAngles euler_from_rotation(const RotationMatrix& r) {
  EulerAngles e;
  e.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  e.roll = std::atan2(r(2, 1), r(2, 2));
  e.yaw = std::atan2(r(1, 0), r(0, 0));
  return e;
}

bool is_rotation(const RotationMatrix& r, double tol) {
  const Mat3 gram = r * r.transpose();
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

ImuAttitudeSample ned_to_body_alignment(const ImuAttitudeSample& sample) {
  // Both the world and body frames flip by Rx(pi) = diag(1,-1,-1), so
  // vectors negate their y/z components and the ZYX angles map to
  // (roll, -pitch, -yaw).
  ImuAttitudeSample out;
  out.attitude.roll = sample.attitude.roll;
  out.attitude.pitch = -sample.attitude.pitch;
  out.attitude.yaw = -sample.attitude.yaw;
  out.rates = Vec3(sample.rates.x(), -sample.rates.y(), -sample.rates.z());
  out.accel = Vec3(sample.accel.x(), -sample.accel.y(), -sample.accel.z());
  return out;
}

}  // namespace mavctl
