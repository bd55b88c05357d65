#include "pslam/wire.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>

static_assert(std::endian::native == std::endian::little,
              "wire codec assumes a little-endian host");

namespace pslam {

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'S', 'L', 'M'};
constexpr std::size_t kMaxPayload = 64u << 20;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T take(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size())
      throw DecodeError(std::string("truncated ") + what, pos_);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t payload_crc(std::span<const std::uint8_t> payload) {
  return std::uint32_t(
      ::crc32(0L, payload.empty() ? Z_NULL : payload.data(),
              uInt(payload.size())));
}

void put_pose(std::vector<std::uint8_t>& out, const Pose& p) {
  put(out, p.translation().x());
  put(out, p.translation().y());
  put(out, p.translation().z());
  put(out, p.quat().x());
  put(out, p.quat().y());
  put(out, p.quat().z());
  put(out, p.quat().w());
}

Pose take_pose(Cursor& c) {
  double tx = c.take<double>("pose");
  double ty = c.take<double>("pose");
  double tz = c.take<double>("pose");
  double qx = c.take<double>("pose");
  double qy = c.take<double>("pose");
  double qz = c.take<double>("pose");
  std::size_t at = c.pos();
  double qw = c.take<double>("pose");
  Eigen::Quaterniond q(qw, qx, qy, qz);
  if (std::abs(q.norm() - 1.0) > 1e-6)
    throw DecodeError("pose quaternion not normalized", at);
  return Pose::from_normalized(q, Vec3(tx, ty, tz));
}

}  // namespace

std::vector<std::uint8_t> encode_cloud(const PlaneCloud& c) {
  std::vector<std::uint8_t> out;
  out.reserve(cloud_encoded_size(c.fits.size()));
  put(out, std::uint32_t(c.fits.size()));
  for (const PlaneFit& f : c.fits) {
    put(out, float(f.plane.n.x()));
    put(out, float(f.plane.n.y()));
    put(out, float(f.plane.n.z()));
    put(out, float(f.plane.d));
    put(out, float(f.tile.x));
    put(out, float(f.tile.y));
    put(out, float(f.tile.w));
    put(out, float(f.tile.h));
  }
  return out;
}

PlaneCloud decode_cloud(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  std::uint32_t count = c.take<std::uint32_t>("fit count");
  if (std::size_t(count) * 32 > c.remaining())
    throw DecodeError("fit count exceeds buffer", c.pos());
  PlaneCloud cloud;
  cloud.fits.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::size_t at = c.pos();
    double a = c.take<float>("fit");
    double b = c.take<float>("fit");
    double cz = c.take<float>("fit");
    double d = c.take<float>("fit");
    float tx = c.take<float>("fit");
    float ty = c.take<float>("fit");
    float tw = c.take<float>("fit");
    float th = c.take<float>("fit");
    double norm = Vec3(a, b, cz).norm();
    if (std::abs(norm - 1.0) > 1e-3)
      throw DecodeError("plane normal drifted off unit length", at);
    PlaneFit fit;
    fit.plane = Plane(Vec3(a, b, cz), d);
    fit.tile = TileRect{int(tx), int(ty), int(tw), int(th)};
    cloud.fits.push_back(fit);
  }
  if (c.remaining() != 0)
    throw DecodeError("trailing bytes after cloud", c.pos());
  return cloud;
}

std::vector<std::uint8_t> encode_keyframe_message(const KeyframeMessage& m) {
  std::vector<std::uint8_t> out;
  out.reserve(160 + cloud_encoded_size(m.cloud.fits.size()));
  put(out, m.agent_id);
  put(out, m.frame_id);
  put(out, m.timestamp);
  put_pose(out, m.relative_pose);
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) put(out, float(m.info(i, j)));
  std::vector<std::uint8_t> cloud = encode_cloud(m.cloud);
  out.insert(out.end(), cloud.begin(), cloud.end());
  return out;
}

KeyframeMessage decode_keyframe_message(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  KeyframeMessage m;
  m.agent_id = c.take<std::uint32_t>("agent id");
  m.frame_id = c.take<std::uint64_t>("frame id");
  m.timestamp = c.take<double>("timestamp");
  m.relative_pose = take_pose(c);
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) {
      double v = c.take<float>("info matrix");
      m.info(i, j) = v;
      m.info(j, i) = v;
    }
  m.cloud = decode_cloud(c.rest());
  m.cloud.frame_id = m.frame_id;
  m.cloud.timestamp = m.timestamp;
  return m;
}

std::vector<std::uint8_t> encode_ack(const AckMessage& m) {
  std::vector<std::uint8_t> out;
  put(out, m.agent_id);
  put(out, m.frame_id);
  put_pose(out, m.pose);
  return out;
}

AckMessage decode_ack(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  AckMessage m;
  m.agent_id = c.take<std::uint32_t>("agent id");
  m.frame_id = c.take<std::uint64_t>("frame id");
  m.pose = take_pose(c);
  if (c.remaining() != 0)
    throw DecodeError("trailing bytes after ack", c.pos());
  return m;
}

std::vector<std::uint8_t> encode_resync(const ResyncMessage& m) {
  std::vector<std::uint8_t> out;
  put(out, m.agent_id);
  put(out, m.last_frame_id);
  return out;
}

ResyncMessage decode_resync(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  ResyncMessage m;
  m.agent_id = c.take<std::uint32_t>("agent id");
  m.last_frame_id = c.take<std::uint64_t>("last frame id");
  if (c.remaining() != 0)
    throw DecodeError("trailing bytes after resync", c.pos());
  return m;
}

std::size_t MemoryStream::read_some(std::uint8_t* buf, std::size_t len) {
  std::size_t n = std::min(len, data_.size() - cursor_);
  std::memcpy(buf, data_.data() + cursor_, n);
  cursor_ += n;
  return n;
}

void MemoryStream::write_all(const std::uint8_t* buf, std::size_t len) {
  data_.insert(data_.end(), buf, buf + len);
}

void frame_message(ByteStream& out, MsgType type,
                   std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> frame;
  frame.reserve(16 + payload.size());
  frame.insert(frame.end(), kMagic, kMagic + 4);
  put(frame, kProtocolVersion);
  put(frame, std::uint16_t(type));
  put(frame, std::uint32_t(payload.size()));
  frame.insert(frame.end(), payload.begin(), payload.end());
  put(frame, payload_crc(payload));
  out.write_all(frame.data(), frame.size());
}

bool FrameReader::fill(std::size_t need) {
  while (buf_.size() < need && !eof_) {
    std::uint8_t chunk[4096];
    std::size_t n = in_.read_some(chunk, sizeof(chunk));
    if (n == 0) {
      eof_ = true;
      break;
    }
    buf_.insert(buf_.end(), chunk, chunk + n);
  }
  return buf_.size() >= need;
}

std::optional<WireFrame> FrameReader::next() {
  for (;;) {
    // Scan to the next magic, discarding garbage from torn frames.
    std::size_t start = 0;
    for (;;) {
      if (!fill(start + 4)) return std::nullopt;
      if (std::memcmp(buf_.data() + start, kMagic, 4) == 0) break;
      ++start;
    }
    if (start > 0) buf_.erase(buf_.begin(), buf_.begin() + start);

    auto drop_candidate = [&] {
      buf_.erase(buf_.begin(), buf_.begin() + 4);
      ++dropped_;
    };

    if (!fill(12)) {
      if (eof_ && buf_.size() >= 4) {
        drop_candidate();
        continue;
      }
      return std::nullopt;
    }
    std::uint16_t version, type_raw;
    std::uint32_t len;
    std::memcpy(&version, buf_.data() + 4, 2);
    std::memcpy(&type_raw, buf_.data() + 6, 2);
    std::memcpy(&len, buf_.data() + 8, 4);
    if (version != kProtocolVersion)
      throw std::runtime_error("wire protocol version mismatch: got " +
                               std::to_string(version));
    if (len > kMaxPayload) {
      // Corrupt length field; skip this magic and rescan.
      drop_candidate();
      continue;
    }
    if (!fill(12 + std::size_t(len) + 4)) {
      // End of stream before the frame completed: a torn or length-corrupted
      // frame must not hide intact frames still sitting in the buffer.
      drop_candidate();
      continue;
    }

    std::span<const std::uint8_t> payload(buf_.data() + 12, len);
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, buf_.data() + 12 + len, 4);
    if (payload_crc(payload) != stored_crc) {
      // Damaged frame: drop it and resynchronize at the next magic.
      drop_candidate();
      continue;
    }
    WireFrame frame;
    frame.type = MsgType(type_raw);
    frame.payload.assign(payload.begin(), payload.end());
    buf_.erase(buf_.begin(), buf_.begin() + 12 + len + 4);
    return frame;
  }
}

}  // namespace pslam
