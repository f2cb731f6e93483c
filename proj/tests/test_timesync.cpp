#include "mavctl/timesync.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>

namespace mavctl {
namespace {

TEST(ImageSyncMatcher, MatchesBufferedSync) {
  ImageSyncMatcher matcher(8);
  matcher.push_sync({10, 1.000});
  matcher.push_sync({11, 1.033});
  const auto out = matcher.push_image({11, 77, 5.0});
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ(out->seq, 11u);
  EXPECT_EQ(out->stamp, 1.033);
  EXPECT_EQ(out->payload, 77u);
}

TEST(ImageSyncMatcher, ImageBeforeSyncIsHeld) {
  ImageSyncMatcher matcher(8);
  EXPECT_FALSE(matcher.push_image({12, 1, 5.0}).has_value());
  const auto out = matcher.push_sync({12, 1.066});
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ(out->stamp, 1.066);
}

TEST(ImageSyncMatcher, OverflowDropsOldest) {
  ImageSyncMatcher matcher(4);
  for (std::uint64_t seq = 0; seq < 5; ++seq)
    EXPECT_FALSE(matcher.push_image({seq, seq, 0.1 * seq}).has_value());
  EXPECT_EQ(matcher.dropped_images(), 1u);
  EXPECT_EQ(matcher.buffered_images(), 4u);
  // seq 0 was evicted, so its sync can never match
  EXPECT_FALSE(matcher.push_sync({0, 0.0}).has_value());
}

TEST(ImageSyncMatcher, EmittedStampsAreBitExact) {
  ImageSyncMatcher matcher(32);
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);

  std::map<std::uint64_t, double> truth;
  std::vector<StampedImage> emitted;
  for (std::uint64_t seq = 0; seq < 2000; ++seq) {
    const double stamp = 0.033 * static_cast<double>(seq) + 1e-7 * jitter(rng);
    truth[seq] = stamp;
    const SyncMessage sync{seq, stamp};
    const ImageMessage image{seq, seq, stamp + 300.0};
    if (jitter(rng) < 0.5) {
      if (auto m = matcher.push_sync(sync)) emitted.push_back(*m);
      if (auto m = matcher.push_image(image)) emitted.push_back(*m);
    } else {
      if (auto m = matcher.push_image(image)) emitted.push_back(*m);
      if (auto m = matcher.push_sync(sync)) emitted.push_back(*m);
    }
  }
  EXPECT_EQ(emitted.size(), 2000u);
  for (const auto& img : emitted) EXPECT_EQ(img.stamp, truth[img.seq]);
  // Seq-ordered, stamp-nondecreasing output stream.
  EXPECT_TRUE(std::is_sorted(emitted.begin(), emitted.end(),
                             [](auto& a, auto& b) { return a.seq < b.seq; }));
  EXPECT_TRUE(std::is_sorted(emitted.begin(), emitted.end(),
                             [](auto& a, auto& b) { return a.stamp < b.stamp; }));
}

TEST(ImuMerger, LinearInterpolationBetweenAccelSamples) {
  ImuMerger merger;
  merger.push_accel(0.000, Vec3(1.0, 0.0, 0.0));
  merger.push_accel(0.010, Vec3(2.0, 0.0, 0.0));
  merger.push_gyro(0.004, Vec3(0.1, 0.2, 0.3));
  const auto out = merger.drain();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].accel.x(), 1.4, 1e-15);
  EXPECT_EQ(out[0].stamp, 0.004);
  EXPECT_EQ(out[0].gyro, Vec3(0.1, 0.2, 0.3));
}

TEST(ImuMerger, ExactStampTakesExactValue) {
  ImuMerger merger;
  merger.push_accel(0.000, Vec3(1.0, -1.0, 0.5));
  merger.push_accel(0.010, Vec3(2.0, 1.0, 1.5));
  merger.push_gyro(0.010, Vec3::Zero());
  const auto out = merger.drain();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].accel, Vec3(2.0, 1.0, 1.5));
}

TEST(ImuMerger, OutputCountMatchesSpanArithmetic) {
  ImuMerger merger;
  std::vector<ImuSample> all;
  // 200 Hz gyro, 250 Hz accel over 10 s
  int gyro_count = 0;
  for (int g = 0, a = 0; g * 0.005 <= 10.0 || a * 0.004 <= 10.0;) {
    const double tg = g * 0.005, ta = a * 0.004;
    if (tg <= ta && tg <= 10.0) {
      merger.push_gyro(tg, Vec3::Zero());
      ++gyro_count;
      ++g;
    } else if (ta <= 10.0) {
      merger.push_accel(ta, Vec3::Zero());
      ++a;
    } else {
      break;
    }
    const auto drained = merger.drain();
    all.insert(all.end(), drained.begin(), drained.end());
  }
  merger.finalize();
  EXPECT_GE(all.size(), 1998u);
  EXPECT_EQ(all.size() + merger.dropped_gyros(),
            static_cast<std::size_t>(gyro_count));
}

TEST(ImuMerger, ExactForAffineSignals) {
  // accel(t) = c0 + c1*t should interpolate with zero error at any stamp
  const Vec3 c0(0.5, -1.0, 2.0), c1(3.0, 0.25, -0.75);
  ImuMerger merger;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  double ta = 0.0;
  std::vector<double> gyro_times;
  double tg = 0.0021;
  for (int i = 0; i < 500; ++i) {
    merger.push_accel(ta, c0 + ta * c1);
    ta += 0.003 + 0.002 * u(rng);
  }
  while (tg < ta - 0.01) {
    gyro_times.push_back(tg);
    tg += 0.004 + 0.002 * u(rng);
  }
  for (double t : gyro_times) merger.push_gyro(t, Vec3::Zero());
  const auto out = merger.drain();
  ASSERT_EQ(out.size(), gyro_times.size());
  for (const auto& s : out) {
    const Vec3 exact = c0 + s.stamp * c1;
    EXPECT_LT((s.accel - exact).norm(), 1e-12);
  }
}

TEST(ApplyCameraOffset, AddsConstantOffset) {
  EXPECT_DOUBLE_EQ(apply_camera_offset(1.000, 0.005), 1.005);
  EXPECT_DOUBLE_EQ(apply_camera_offset(42.5, 0.0), 42.5);
}

TEST(ApplyCameraOffset, UniformShiftThroughMatcher) {
  ImageSyncMatcher matcher(16);
  const double offset = 0.0075;
  std::vector<double> shifted;
  for (std::uint64_t seq = 0; seq < 100; ++seq) {
    const double stamp = 0.033 * static_cast<double>(seq);
    matcher.push_sync({seq, stamp});
    if (auto m = matcher.push_image({seq, seq, 0.0}))
      shifted.push_back(apply_camera_offset(m->stamp, offset) - stamp);
  }
  ASSERT_EQ(shifted.size(), 100u);
  for (double d : shifted) EXPECT_NEAR(d, offset, 1e-12);
}

TEST(StreamCsv, RoundTrip) {
  std::vector<StreamEvent> events;
  StreamEvent img;
  img.kind = StreamEvent::Kind::Image;
  img.seq = 7;
  img.stamp = 0.233;
  events.push_back(img);
  StreamEvent sync;
  sync.kind = StreamEvent::Kind::Sync;
  sync.seq = 7;
  sync.stamp = 0.231234567891234;
  events.push_back(sync);
  StreamEvent gyro;
  gyro.kind = StreamEvent::Kind::Gyro;
  gyro.stamp = 0.101;
  gyro.payload = Vec3(0.1, -0.2, 0.3);
  events.push_back(gyro);
  StreamEvent accel;
  accel.kind = StreamEvent::Kind::Accel;
  accel.stamp = 0.1015;
  accel.payload = Vec3(9.7, 0.01, -0.02);
  events.push_back(accel);

  const std::string path =
      (std::filesystem::temp_directory_path() / "mavctl_stream_test.csv").string();
  save_stream_csv(events, path);
  const auto loaded = load_stream_csv(path);
  ASSERT_EQ(loaded.size(), events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    EXPECT_EQ(loaded[i].kind, events[i].kind);
    EXPECT_EQ(loaded[i].seq, events[i].seq);
    EXPECT_EQ(loaded[i].stamp, events[i].stamp);
    EXPECT_EQ(loaded[i].payload, events[i].payload);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace mavctl
