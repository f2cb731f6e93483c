#include "mavctl/geometry.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>
#include <cmath>
#include <random>

namespace mavctl {
namespace {

Mat3 elementary_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

Mat3 elementary_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

Mat3 elementary_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

TEST(RotationFromEuler, IdentityAtZero) {
  const RotationMatrix r = rotation_from_euler({0.0, 0.0, 0.0});
  EXPECT_LT((r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RotationFromEuler, QuarterTurnYawMapsBodyXToWorldY) {
  const RotationMatrix r = rotation_from_euler({0.0, 0.0, M_PI / 2.0});
  const Vec3 mapped = r * Vec3(1.0, 0.0, 0.0);
  EXPECT_NEAR(mapped.x(), 0.0, 1e-15);
  EXPECT_NEAR(mapped.y(), 1.0, 1e-15);
  EXPECT_NEAR(mapped.z(), 0.0, 1e-15);
}

TEST(RotationFromEuler, MatchesElementaryRotationProduct) {
  const EulerAngles angles{0.1, -0.2, 0.3};
  const RotationMatrix r = rotation_from_euler(angles);
  const Mat3 expected =
      elementary_z(angles.yaw) * elementary_y(angles.pitch) * elementary_x(angles.roll);
  EXPECT_LT((r - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
}

TEST(RotationFromEuler, RandomAnglesStayInSO3) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> tilt(-M_PI / 2 + 0.01, M_PI / 2 - 0.01);
  std::uniform_real_distribution<double> heading(-M_PI, M_PI);
  for (int i = 0; i < 500; ++i) {
    const RotationMatrix r =
        rotation_from_euler({tilt(rng), tilt(rng), heading(rng)});
    EXPECT_TRUE(is_rotation(r, 1e-9));
  }
}

TEST(RotationFromEuler, EulerRoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> tilt(-1.2, 1.2);
  std::uniform_real_distribution<double> heading(-M_PI + 0.01, M_PI);
  for (int i = 0; i < 200; ++i) {
    const EulerAngles in{tilt(rng), tilt(rng), heading(rng)};
    const EulerAngles out = euler_from_rotation(rotation_from_euler(in));
    EXPECT_NEAR(in.roll, out.roll, 1e-12);
    EXPECT_NEAR(in.pitch, out.pitch, 1e-12);
    EXPECT_NEAR(in.yaw, out.yaw, 1e-12);
  }
}

TEST(NedAlignment, NegatesYandZComponents) {
  ImuAttitudeSample ned;
  ned.rates = Vec3(0.0, 0.0, 1.0);
  ned.accel = Vec3(0.0, 0.0, -9.81);
  const ImuAttitudeSample body = ned_to_body_alignment(ned);
  EXPECT_EQ(body.rates.z(), -1.0);
  EXPECT_EQ(body.accel.z(), 9.81);
  EXPECT_EQ(body.rates.x(), 0.0);
}

TEST(NedAlignment, ZeroMapsToZero) {
  const ImuAttitudeSample out = ned_to_body_alignment(ImuAttitudeSample{});
  EXPECT_EQ(out.rates, Vec3::Zero());
  EXPECT_EQ(out.accel, Vec3::Zero());
  EXPECT_EQ(out.attitude.roll, 0.0);
}

TEST(NedAlignment, DoubleApplicationIsIdentity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    ImuAttitudeSample sample;
    sample.attitude = {u(rng), u(rng), u(rng)};
    sample.rates = Vec3(u(rng), u(rng), u(rng));
    sample.accel = Vec3(u(rng), u(rng), u(rng));
    const ImuAttitudeSample twice =
        ned_to_body_alignment(ned_to_body_alignment(sample));
    EXPECT_DOUBLE_EQ(sample.attitude.roll, twice.attitude.roll);
    EXPECT_DOUBLE_EQ(sample.attitude.pitch, twice.attitude.pitch);
    EXPECT_DOUBLE_EQ(sample.attitude.yaw, twice.attitude.yaw);
    EXPECT_EQ(sample.rates, twice.rates);
    EXPECT_EQ(sample.accel, twice.accel);
  }
}

TEST(NedAlignment, AttitudeMapConsistentWithFrameFlip) {
  // X R X with X = Rx(pi) must equal the rotation of the mapped angles.
  const Mat3 x_flip = elementary_x(M_PI);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    ImuAttitudeSample s;
    s.attitude = {u(rng), u(rng), u(rng)};
    const Mat3 flipped = x_flip * rotation_from_euler(s.attitude) * x_flip;
    const Mat3 mapped = rotation_from_euler(ned_to_body_alignment(s).attitude);
    EXPECT_LT((flipped - mapped).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(WrapAngle, StaysInHalfOpenInterval) {
  EXPECT_NEAR(wrap_angle(3.0 * M_PI), M_PI, 1e-12);
  EXPECT_NEAR(wrap_angle(-3.0 * M_PI), M_PI, 1e-12);
  EXPECT_NEAR(wrap_angle(0.1), 0.1, 1e-15);
  EXPECT_NEAR(wrap_angle(2.0 * M_PI + 0.1), 0.1, 1e-12);
  EXPECT_GT(wrap_angle(-M_PI), 0.0);  // -pi folds to +pi
}

TEST(FrameTransform, InverseAndCompose) {
  FrameTransform t;
  t.rotation = rotation_from_euler({0.2, -0.1, 0.7});
  t.translation = Vec3(1.0, -2.0, 0.5);
  t.from_frame = Frame::Camera;
  t.to_frame = Frame::Body;

  const Vec3 p(0.3, 0.4, -0.2);
  const Vec3 round_trip = t.inverse().apply(t.apply(p));
  EXPECT_LT((round_trip - p).norm(), 1e-12);

  const FrameTransform identity = t.inverse().compose(t);
  EXPECT_LT((identity.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(identity.translation.norm(), 1e-12);
  EXPECT_EQ(identity.from_frame, Frame::Camera);
  EXPECT_EQ(identity.to_frame, Frame::Camera);
}

}  // namespace
}  // namespace mavctl
