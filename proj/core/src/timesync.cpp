#include "mavctl/timesync.hpp"

#include <fstream>
#include <stdexcept>

#include "mavctl/csv.hpp"

namespace mavctl {

ImageSyncMatcher::ImageSyncMatcher(std::size_t capacity)
    : images_(capacity), syncs_(capacity) {}

std::optional<StampedImage> ImageSyncMatcher::push_image(const ImageMessage& image) {
  if (auto sync = syncs_.take(image.seq)) {
    // Entries older than a completed match can never match anymore: their
    // counterpart stream has already advanced past them.
    dropped_images_ += images_.drop_older_than(image.seq);
    dropped_syncs_ += syncs_.drop_older_than(image.seq);
    ++matched_;
    return StampedImage{image.seq, sync->stamp, image.payload};
  }
  if (images_.push(image)) ++dropped_images_;
  return std::nullopt;
}

std::optional<StampedImage> ImageSyncMatcher::push_sync(const SyncMessage& sync) {
  if (auto image = images_.take(sync.seq)) {
    dropped_images_ += images_.drop_older_than(sync.seq);
    dropped_syncs_ += syncs_.drop_older_than(sync.seq);
    ++matched_;
    return StampedImage{image->seq, sync.stamp, image->payload};
  }
  if (syncs_.push(sync)) ++dropped_syncs_;
  return std::nullopt;
}

void ImuMerger::push_gyro(double stamp, const Vec3& gyro) {
  if (!(stamp > last_gyro_stamp_))
    throw std::invalid_argument("ImuMerger: gyro stamps must strictly increase");
  last_gyro_stamp_ = stamp;
  gyros_.push_back({stamp, gyro});
}

void ImuMerger::push_accel(double stamp, const Vec3& accel) {
  if (!(stamp > last_accel_stamp_))
    throw std::invalid_argument("ImuMerger: accel stamps must strictly increase");
  last_accel_stamp_ = stamp;
  accels_.push_back({stamp, accel});
}

std::vector<ImuSample> ImuMerger::drain() {
  while (!gyros_.empty()) {
    const auto& g = gyros_.front();
    if (!accels_.empty() && g.stamp < accels_.front().stamp) {
      // Before the accel span: can never be bracketed.
      gyros_.pop_front();
      ++dropped_gyros_;
      continue;
    }
    // Advance so accels_[0] <= g.stamp <= accels_[1].
    while (accels_.size() >= 2 && accels_[1].stamp < g.stamp) accels_.pop_front();
    if (accels_.size() < 2) break;  // not bracketed yet, wait for more accels

    const auto& a0 = accels_[0];
    const auto& a1 = accels_[1];
    const double alpha = (g.stamp - a0.stamp) / (a1.stamp - a0.stamp);
    ImuSample sample;
    sample.stamp = g.stamp;
    sample.gyro = g.value;
    sample.accel = a0.value + alpha * (a1.value - a0.value);
    ready_.push_back(sample);
    ++emitted_;
    gyros_.pop_front();
  }
  std::vector<ImuSample> out;
  out.swap(ready_);
  return out;
}

void ImuMerger::finalize() {
  drain();
  dropped_gyros_ += gyros_.size();
  gyros_.clear();
}

namespace {

const char* kind_token(StreamEvent::Kind kind) {
  switch (kind) {
    case StreamEvent::Kind::Image: return "img";
    case StreamEvent::Kind::Sync: return "sync";
    case StreamEvent::Kind::Gyro: return "gyro";
    case StreamEvent::Kind::Accel: return "accel";
  }
  return "?";
}

StreamEvent::Kind kind_from_token(const std::string& token) {
  if (token == "img") return StreamEvent::Kind::Image;
  if (token == "sync") return StreamEvent::Kind::Sync;
  if (token == "gyro") return StreamEvent::Kind::Gyro;
  if (token == "accel") return StreamEvent::Kind::Accel;
  throw std::runtime_error("stream csv: unknown kind '" + token + "'");
}

}  // namespace

std::vector<StreamEvent> load_stream_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stream file: " + path);
  std::vector<StreamEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (fields.size() < 3)
      throw std::runtime_error("stream csv: too few fields in " + path);
    StreamEvent e;
    e.kind = kind_from_token(fields[0]);
    e.seq = fields[1].empty() ? 0 : static_cast<std::uint64_t>(csv::to_double(fields[1]));
    e.stamp = csv::to_double(fields[2]);
    for (std::size_t i = 3; i < std::min<std::size_t>(fields.size(), 6); ++i)
      e.payload[static_cast<int>(i) - 3] = csv::to_double(fields[i]);
    events.push_back(e);
  }
  return events;
}

void save_stream_csv(const std::vector<StreamEvent>& events,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write stream file: " + path);
  for (const auto& e : events) {
    out << kind_token(e.kind) << ',';
    if (e.kind == StreamEvent::Kind::Image || e.kind == StreamEvent::Kind::Sync)
      out << e.seq;
    out << ',' << csv::from_double(e.stamp);
    if (e.kind == StreamEvent::Kind::Gyro || e.kind == StreamEvent::Kind::Accel)
      out << ',' << csv::from_double(e.payload.x()) << ','
          << csv::from_double(e.payload.y()) << ','
          << csv::from_double(e.payload.z());
    out << "\n";
  }
}

}  // namespace mavctl
