#include "pslam/frontend.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

namespace pslam {

Frontend::Frontend(const CameraIntrinsics& intr, FrontendConfig cfg)
    : intr_(intr), cfg_(std::move(cfg)), tables_(intr) {
  if (!intr_.valid()) throw std::invalid_argument("frontend: bad intrinsics");
  if (!cfg_.valid()) throw std::invalid_argument("frontend: bad config");
}

KeyframeMessage Frontend::retire_keyframe() const {
  KeyframeMessage msg;
  msg.agent_id = cfg_.agent_id;
  msg.frame_id = state_.keyframe.frame_id;
  msg.timestamp = state_.keyframe.timestamp;
  msg.relative_pose = state_.pending_rel;
  msg.info = state_.pending_info;
  msg.cloud = state_.keyframe;
  return msg;
}

std::optional<KeyframeMessage> Frontend::process_frame(const DepthImage& depth,
                                                       double timestamp,
                                                       Clock* clock) {
  ++stats_.frames;
  CompressResult comp = compress(depth, intr_, cfg_.compression, tables_, clock);
  stats_.compress_seconds += comp.stats.wall_seconds;
  PlaneCloud cloud = std::move(comp.cloud);
  cloud.frame_id = next_frame_id_++;
  cloud.timestamp = timestamp;

  if (!state_.initialized) {
    state_.initialized = true;
    state_.keyframe = std::move(cloud);
    state_.keyframe_pose = Pose::identity();
    state_.current_pose = Pose::identity();
    state_.last_relative = Pose::identity();
    state_.pending_rel = Pose::identity();
    state_.pending_info = Mat6::Identity();
    state_.frames_since_keyframe = 0;
    ++stats_.keyframes;
    return std::nullopt;  // nothing to constrain the first keyframe to yet
  }

  if (cloud.fits.size() < 4) {
    state_.tracking_gap = true;
    ++stats_.skipped_frames;
    return std::nullopt;
  }

  ++state_.frames_since_keyframe;
  bool tracked = false;
  AlignmentResult res;
  try {
    res = align_clouds(cloud, state_.keyframe, state_.last_relative, cfg_.icap);
    tracked = res.converged;
  } catch (const AlignmentError&) {
    tracked = false;
  }

  if (tracked) {
    state_.last_relative = res.T;
    state_.current_pose = pose_compose(state_.keyframe_pose, res.T);
  } else {
    ++stats_.tracking_failures;
  }

  bool promote = !tracked || state_.tracking_gap ||
                 state_.last_relative.rotation_angle() >=
                     cfg_.keyframe_rot_thresh ||
                 state_.last_relative.translation().norm() >=
                     cfg_.keyframe_trans_thresh;
  if (!promote) return std::nullopt;

  KeyframeMessage msg = retire_keyframe();

  Pose new_rel = state_.last_relative;
  Mat6 new_info;
  if (tracked) {
    new_info = alignment_information(res, cfg_.info);
  } else {
    // Repair edge: keep the chain connected under the stale estimate but
    // tell the backend to trust it far less.
    double base = cfg_.info.kappa /
                  (cfg_.icap.match_gate * cfg_.icap.match_gate +
                   cfg_.info.epsilon0);
    new_info = cfg_.gap_info_scale * base * Mat6::Identity();
  }

  state_.keyframe = std::move(cloud);
  state_.keyframe_pose = pose_compose(state_.keyframe_pose, new_rel);
  state_.current_pose = state_.keyframe_pose;
  state_.last_relative = Pose::identity();
  state_.pending_rel = new_rel;
  state_.pending_info = new_info;
  state_.frames_since_keyframe = 0;
  state_.tracking_gap = false;
  ++stats_.keyframes;
  ++stats_.messages;
  return msg;
}

std::optional<KeyframeMessage> Frontend::flush() {
  if (!state_.initialized || flushed_) return std::nullopt;
  flushed_ = true;
  ++stats_.messages;
  return retire_keyframe();
}

namespace {

/// Bounded FIFO: push blocks when full, pop blocks when empty until closed.
class MessageQueue {
 public:
  explicit MessageQueue(std::size_t depth) : depth_(depth) {}

  void push(KeyframeMessage msg) {
    std::unique_lock lk(mu_);
    cv_space_.wait(lk, [&] { return items_.size() < depth_ || failed_; });
    if (failed_) throw FrontendSessionError(error_);
    items_.push_back(std::move(msg));
    cv_data_.notify_one();
  }

  std::optional<KeyframeMessage> pop() {
    std::unique_lock lk(mu_);
    cv_data_.wait(lk, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    KeyframeMessage msg = std::move(items_.front());
    items_.pop_front();
    cv_space_.notify_one();
    return msg;
  }

  void close() {
    std::scoped_lock lk(mu_);
    closed_ = true;
    cv_data_.notify_all();
  }

  void fail(const std::string& why) {
    std::scoped_lock lk(mu_);
    failed_ = true;
    error_ = why;
    cv_space_.notify_all();
  }

  bool failed() const {
    std::scoped_lock lk(mu_);
    return failed_;
  }
  std::string error() const {
    std::scoped_lock lk(mu_);
    return error_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_data_, cv_space_;
  std::deque<KeyframeMessage> items_;
  std::size_t depth_;
  bool closed_ = false;
  bool failed_ = false;
  std::string error_;
};

}  // namespace

FrontendStats run_frontend(FrameSource& source, MessageSink& sink,
                           const CameraIntrinsics& intr,
                           const FrontendConfig& cfg) {
  Frontend fe(intr, cfg);
  MessageQueue queue(16);
  std::int64_t bytes_sent = 0;

  std::thread sender([&] {
    while (auto msg = queue.pop()) {
      bool ok = false;
      for (int attempt = 0; attempt <= cfg.send_retries && !ok; ++attempt)
        ok = sink.send(*msg);
      if (!ok) {
        queue.fail("transport failed after " +
                   std::to_string(cfg.send_retries + 1) + " attempts");
        return;
      }
      // 160-byte fixed header + the cloud payload.
      bytes_sent += 160 + std::int64_t(cloud_encoded_size(msg->cloud.size()));
    }
  });

  try {
    while (auto frame = source.next()) {
      if (auto msg = fe.process_frame(frame->depth, frame->timestamp))
        queue.push(std::move(*msg));
    }
    if (auto msg = fe.flush()) queue.push(std::move(*msg));
    queue.close();
    sender.join();
  } catch (...) {
    queue.close();
    sender.join();
    throw;
  }
  if (queue.failed()) throw FrontendSessionError(queue.error());

  FrontendStats stats = fe.stats();
  stats.bytes_sent = bytes_sent;
  return stats;
}

}  // namespace pslam
