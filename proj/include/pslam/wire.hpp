#pragma once

#include "pslam/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pslam {

// Binary wire protocol between frontend and backend. All multi-byte
// integers and floats are little-endian. Layouts are documented
// byte-for-byte in docs/protocol.md.

class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Serialized size of a plane cloud: 4-byte count plus 32 bytes per fit.
constexpr std::size_t cloud_encoded_size(std::size_t fit_count) {
  return 4 + 32 * fit_count;
}

/// u32 fit count, then per fit 8 x f32: a b c d tile_x tile_y tile_w tile_h.
/// frame_id and timestamp travel in the enclosing message, not here.
std::vector<std::uint8_t> encode_cloud(const PlaneCloud& c);

/// Inverse of encode_cloud over the whole buffer. Normals are renormalized;
/// a stored |n| off unit by more than 1e-3 or a short buffer raises
/// DecodeError with the offending byte offset.
PlaneCloud decode_cloud(std::span<const std::uint8_t> bytes);

/// The unit of frontend -> backend traffic: one keyframe's cloud plus the
/// odometry constraint from the previously emitted keyframe.
struct KeyframeMessage {
  std::uint32_t agent_id = 0;
  std::uint64_t frame_id = 0;
  double timestamp = 0.0;
  Pose relative_pose;
  Mat6 info = Mat6::Identity();
  PlaneCloud cloud;
};

std::vector<std::uint8_t> encode_keyframe_message(const KeyframeMessage& m);
KeyframeMessage decode_keyframe_message(std::span<const std::uint8_t> bytes);

/// Backend acknowledgment: the current estimate of the agent's latest pose.
struct AckMessage {
  std::uint32_t agent_id = 0;
  std::uint64_t frame_id = 0;
  Pose pose;
};

/// Backend resynchronization request after a rejected message.
struct ResyncMessage {
  std::uint32_t agent_id = 0;
  std::uint64_t last_frame_id = 0;
};

std::vector<std::uint8_t> encode_ack(const AckMessage& m);
AckMessage decode_ack(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_resync(const ResyncMessage& m);
ResyncMessage decode_resync(std::span<const std::uint8_t> bytes);

enum class MsgType : std::uint16_t {
  keyframe = 1,
  ack = 2,
  resync = 3,
};

struct WireFrame {
  MsgType type = MsgType::keyframe;
  std::vector<std::uint8_t> payload;
};

constexpr std::uint16_t kProtocolVersion = 1;

/// Minimal blocking byte stream; TCP sockets and in-memory pipes both
/// implement it.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  /// Returns bytes read, 0 on clean end of stream; throws on hard errors.
  virtual std::size_t read_some(std::uint8_t* buf, std::size_t len) = 0;
  virtual void write_all(const std::uint8_t* buf, std::size_t len) = 0;
};

class MemoryStream final : public ByteStream {
 public:
  std::size_t read_some(std::uint8_t* buf, std::size_t len) override;
  void write_all(const std::uint8_t* buf, std::size_t len) override;
  std::vector<std::uint8_t>& buffer() { return data_; }

 private:
  std::vector<std::uint8_t> data_;
  std::size_t cursor_ = 0;
};

/// MAGIC "PSLM" | u16 version | u16 msg_type | u32 payload_len | payload |
/// u32 crc32(payload).
void frame_message(ByteStream& out, MsgType type,
                   std::span<const std::uint8_t> payload);

/// Incremental frame reader. CRC failures drop the damaged frame and
/// resynchronize by scanning for the next magic; a version mismatch throws.
class FrameReader {
 public:
  explicit FrameReader(ByteStream& in) : in_(in) {}

  /// Next intact frame, or nullopt at end of stream.
  std::optional<WireFrame> next();

  std::size_t frames_dropped() const { return dropped_; }

 private:
  bool fill(std::size_t need);

  ByteStream& in_;
  std::vector<std::uint8_t> buf_;
  std::size_t dropped_ = 0;
  bool eof_ = false;
};

}  // namespace pslam
