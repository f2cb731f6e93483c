#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mavctl/geometry.hpp"

namespace mavctl {

/// Companion message carrying the IMU-clock timestamp of one image.
struct SyncMessage {
  std::uint64_t seq{0};
  double stamp{0.0};  // s, IMU clock
};

/// Image with its camera-clock arrival time and an opaque payload handle.
struct ImageMessage {
  std::uint64_t seq{0};
  std::uint64_t payload{0};
  double arrival_stamp{0.0};  // s, camera clock
};

struct StampedImage {
  std::uint64_t seq{0};
  double stamp{0.0};  // s, IMU clock (bit-exact copy of the sync stamp)
  std::uint64_t payload{0};
};

/// Gyro/accel pair on a common stamp.
struct ImuSample {
  double stamp{0.0};
  Vec3 gyro{Vec3::Zero()};   // rad/s
  Vec3 accel{Vec3::Zero()};  // m/s^2
};

/// Fixed-capacity seq-ordered buffer. Lookup is exact-match only; pushing
/// into a full buffer evicts the oldest entry.
template <typename Item>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return slots_.size(); }

  /// Returns the evicted entry when the buffer was full.
  std::optional<Item> push(const Item& item) {
    std::optional<Item> evicted;
    if (slots_.size() == capacity_) {
      evicted = slots_.front();
      slots_.pop_front();
    }
    slots_.push_back(item);
    return evicted;
  }

  /// Removes and returns the entry with exactly this seq, if present.
  std::optional<Item> take(std::uint64_t seq) {
    for (auto it = slots_.begin(); it != slots_.end(); ++it) {
      if (it->seq == seq) {
        Item item = *it;
        slots_.erase(it);
        return item;
      }
    }
    return std::nullopt;
  }

  /// Drops entries older than seq; returns how many were removed.
  std::size_t drop_older_than(std::uint64_t seq) {
    std::size_t dropped = 0;
    while (!slots_.empty() && slots_.front().seq < seq) {
      slots_.pop_front();
      ++dropped;
    }
    return dropped;
  }

 private:
  std::size_t capacity_;
  std::deque<Item> slots_;
};

/// Matches images to sync messages by sequence number through two ring
/// buffers. Never blocks; overflow and stale entries are dropped and counted.
class ImageSyncMatcher {
 public:
  explicit ImageSyncMatcher(std::size_t capacity = 32);

  std::optional<StampedImage> push_image(const ImageMessage& image);
  std::optional<StampedImage> push_sync(const SyncMessage& sync);

  std::size_t matched_count() const { return matched_; }
  std::size_t dropped_images() const { return dropped_images_; }
  std::size_t dropped_syncs() const { return dropped_syncs_; }
  std::size_t buffered_images() const { return images_.size(); }
  std::size_t buffered_syncs() const { return syncs_.size(); }

 private:
  RingBuffer<ImageMessage> images_;
  RingBuffer<SyncMessage> syncs_;
  std::size_t matched_{0};
  std::size_t dropped_images_{0};
  std::size_t dropped_syncs_{0};
};

/// Merges a gyro stream with a slower/faster accelerometer stream into
/// combined samples at the gyro rate. Accel values are linearly interpolated
/// between the bracketing samples; gyro samples that can never be bracketed
/// are dropped and counted.
class ImuMerger {
 public:
  void push_gyro(double stamp, const Vec3& gyro);
  void push_accel(double stamp, const Vec3& accel);

  /// Emits all currently bracketable samples, in stamp order.
  std::vector<ImuSample> drain();
  /// Drops gyro samples still waiting at end of stream and counts them.
  void finalize();

  std::size_t emitted_count() const { return emitted_; }
  std::size_t dropped_gyros() const { return dropped_gyros_; }

 private:
  struct Stamped {
    double stamp;
    Vec3 value;
  };
  std::deque<Stamped> gyros_;
  std::deque<Stamped> accels_;
  std::vector<ImuSample> ready_;
  double last_gyro_stamp_{-std::numeric_limits<double>::infinity()};
  double last_accel_stamp_{-std::numeric_limits<double>::infinity()};
  std::size_t emitted_{0};
  std::size_t dropped_gyros_{0};
};

/// Applies the constant camera-IMU clock offset.
inline double apply_camera_offset(double stamp, double offset) {
  return stamp + offset;
}

/// One replayable stream event: an image, sync, gyro, or accel record.
struct StreamEvent {
  enum class Kind { Image, Sync, Gyro, Accel } kind{Kind::Image};
  std::uint64_t seq{0};  // images and syncs only
  double stamp{0.0};
  Vec3 payload{Vec3::Zero()};  // gyro/accel values; image payload handle in x
};

/// Replay format: CSV lines `kind,seq_or_blank,stamp,payload...`.
std::vector<StreamEvent> load_stream_csv(const std::string& path);
void save_stream_csv(const std::vector<StreamEvent>& events,
                     const std::string& path);

}  // namespace mavctl
