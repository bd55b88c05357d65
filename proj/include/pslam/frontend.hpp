#pragma once

#include "pslam/clock.hpp"
#include "pslam/icap.hpp"
#include "pslam/plane_fit.hpp"
#include "pslam/wire.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace pslam {

struct FrontendConfig {
  std::uint32_t agent_id = 0;
  CompressionConfig compression;
  double keyframe_rot_thresh = 15.0 * M_PI / 180.0;  // radians
  double keyframe_trans_thresh = 0.5;                // meters
  IcapParams icap;
  InformationParams info;
  double gap_info_scale = 0.01;  // deflates information on tracking repairs
  int send_retries = 3;

  bool valid() const {
    return keyframe_rot_thresh > 0.0 && keyframe_trans_thresh > 0.0 &&
           compression.valid();
  }
};

/// Tracking state: the single keyframe the frontend keeps plus the pose
/// estimate of the in-flight frame relative to it.
struct LocalMap {
  bool initialized = false;
  PlaneCloud keyframe;
  Pose keyframe_pose;   // odometry frame
  Pose current_pose;    // equals keyframe_pose right after promotion
  Pose last_relative;   // keyframe -> current frame
  int frames_since_keyframe = 0;
  bool tracking_gap = false;  // a frame was skipped; promote on next success

  // Constraint to ship with this keyframe when it retires: relative pose
  // from the previously emitted keyframe and its information weight.
  Pose pending_rel;
  Mat6 pending_info = Mat6::Identity();
};

struct FrontendStats {
  std::int64_t frames = 0;
  std::int64_t keyframes = 0;
  std::int64_t messages = 0;
  std::int64_t bytes_sent = 0;
  std::int64_t skipped_frames = 0;
  std::int64_t tracking_failures = 0;
  double compress_seconds = 0.0;
  double mean_compress_seconds() const {
    return frames == 0 ? 0.0 : compress_seconds / double(frames);
  }
};

/// Compresses incoming depth frames, tracks against the current keyframe
/// with ICaP, and emits a KeyframeMessage whenever viewpoint change
/// promotes a new keyframe. Messages always describe the retiring
/// keyframe, so the chain each one carries is complete.
class Frontend {
 public:
  Frontend(const CameraIntrinsics& intr, FrontendConfig cfg);

  /// Returns the message to forward when this frame promoted a keyframe.
  std::optional<KeyframeMessage> process_frame(const DepthImage& depth,
                                               double timestamp,
                                               Clock* clock = nullptr);

  /// Emits the final keyframe at end of stream (empty if none exists).
  std::optional<KeyframeMessage> flush();

  const LocalMap& state() const { return state_; }
  const FrontendStats& stats() const { return stats_; }
  const TanTables& tables() const { return tables_; }

 private:
  KeyframeMessage retire_keyframe() const;

  CameraIntrinsics intr_;
  FrontendConfig cfg_;
  TanTables tables_;
  LocalMap state_;
  FrontendStats stats_;
  std::uint64_t next_frame_id_ = 0;
  bool flushed_ = false;
};

/// Pull interface for depth frames.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  struct Frame {
    double timestamp = 0.0;
    DepthImage depth;
  };
  virtual std::optional<Frame> next() = 0;
};

/// Push interface for outgoing keyframe messages; returns false on a
/// transport failure (retried up to the configured bound).
class MessageSink {
 public:
  virtual ~MessageSink() = default;
  virtual bool send(const KeyframeMessage& msg) = 0;
};

class FrontendSessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Drains the source through the frontend, forwarding emitted messages in
/// order through a bounded queue (depth 16; blocks when full so no message
/// is ever dropped). Throws FrontendSessionError once a message exhausts
/// its retries.
FrontendStats run_frontend(FrameSource& source, MessageSink& sink,
                           const CameraIntrinsics& intr,
                           const FrontendConfig& cfg);

}  // namespace pslam
