#include "pslam/wire.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace pslam;

namespace {

PlaneCloud random_cloud(oracle::Rng& rng, int n) {
  PlaneCloud c = oracle::random_spanning_cloud(rng, n);
  for (std::size_t i = 0; i < c.fits.size(); ++i) {
    c.fits[i].tile = {int(rng.uniform(0, 600)), int(rng.uniform(0, 440)),
                      int(rng.uniform(1, 40)), int(rng.uniform(1, 40))};
  }
  c.frame_id = std::uint64_t(rng.uniform(0, 1e6));
  c.timestamp = rng.uniform(0, 1e4);
  return c;
}

KeyframeMessage random_message(oracle::Rng& rng) {
  KeyframeMessage m;
  m.agent_id = std::uint32_t(rng.uniform(0, 1000));
  m.cloud = random_cloud(rng, 4 + int(rng.uniform(0, 12)));
  m.frame_id = m.cloud.frame_id;
  m.timestamp = m.cloud.timestamp;
  m.relative_pose = oracle::random_pose(rng, 1.5, 2.0);
  Mat6 A;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) A(i, j) = rng.uniform(-1, 1);
  Mat6 spd = A * A.transpose() + Mat6::Identity();
  // Round-trip the info through f32 so re-encoding is lossless.
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) m.info(i, j) = double(float(spd(i, j)));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < i; ++j) m.info(i, j) = m.info(j, i);
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("wire");

TEST_CASE("cloud size formula") {
  PlaneCloud empty;
  CHECK(encode_cloud(empty).size() == 4);

  oracle::Rng rng(191);
  PlaneCloud c = random_cloud(rng, 10);
  CHECK(encode_cloud(c).size() == 4 + 32 * 10);
  CHECK(cloud_encoded_size(10) == 4 + 32 * 10);

  // The per-image planar map size the size formula must reproduce:
  // 1375 fits -> 44,004 bytes (~0.044 MB per image).
  CHECK(cloud_encoded_size(1375) == 44004);
}

TEST_CASE("raw depth baseline is ~1.2 MB per image") {
  const double raw_bytes = 640.0 * 480.0 * 4.0;
  CHECK(raw_bytes == 1228800.0);
  CHECK(std::abs(raw_bytes / 1e6 - 1.20) / 1.20 < 0.03);
}

TEST_CASE("cloud roundtrip") {
  oracle::Rng rng(193);
  for (int t = 0; t < 50; ++t) {
    PlaneCloud c = random_cloud(rng, 1 + int(rng.uniform(0, 20)));
    std::vector<std::uint8_t> bytes = encode_cloud(c);
    PlaneCloud back = decode_cloud(bytes);
    REQUIRE(back.fits.size() == c.fits.size());
    for (std::size_t i = 0; i < c.fits.size(); ++i) {
      // Stored fields survive at f32 resolution.
      CHECK(float(back.fits[i].plane.n.x()) ==
            doctest::Approx(float(c.fits[i].plane.n.x())).epsilon(1e-6));
      CHECK(float(back.fits[i].plane.d) ==
            doctest::Approx(float(c.fits[i].plane.d)).epsilon(1e-6));
      CHECK(back.fits[i].tile == c.fits[i].tile);
    }
    // And the byte image is a fixpoint after one decode.
    CHECK(encode_cloud(back) == bytes);
  }
}

TEST_CASE("cloud decode errors") {
  oracle::Rng rng(197);
  PlaneCloud c = random_cloud(rng, 5);
  std::vector<std::uint8_t> bytes = encode_cloud(c);

  SUBCASE("truncated mid-fit") {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 4 + 32 + 11);
    try {
      decode_cloud(cut);
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(e.offset() >= 32);  // inside the second record
    }
  }
  SUBCASE("count larger than the buffer") {
    std::uint32_t big = 1000;
    std::memcpy(bytes.data(), &big, 4);
    CHECK_THROWS_AS(decode_cloud(bytes), DecodeError);
  }
  SUBCASE("trailing garbage") {
    bytes.push_back(0xAB);
    CHECK_THROWS_AS(decode_cloud(bytes), DecodeError);
  }
  SUBCASE("normal drift") {
    // Scale the first normal far from unit length.
    float bad = 2.0f;
    std::memcpy(bytes.data() + 4, &bad, 4);
    CHECK_THROWS_AS(decode_cloud(bytes), DecodeError);
  }
}

TEST_CASE("keyframe message roundtrip is byte-exact") {
  oracle::Rng rng(199);
  for (int t = 0; t < 50; ++t) {
    KeyframeMessage m = random_message(rng);
    std::vector<std::uint8_t> bytes = encode_keyframe_message(m);
    KeyframeMessage back = decode_keyframe_message(bytes);
    CHECK(back.agent_id == m.agent_id);
    CHECK(back.frame_id == m.frame_id);
    CHECK(back.timestamp == m.timestamp);
    CHECK(back.relative_pose.quat().coeffs() ==
          m.relative_pose.quat().coeffs());
    CHECK(back.relative_pose.translation() == m.relative_pose.translation());
    CHECK(back.info == m.info);
    CHECK(back.cloud.frame_id == m.frame_id);
    CHECK(encode_keyframe_message(back) == bytes);
  }
}

TEST_CASE("ack and resync roundtrip") {
  oracle::Rng rng(211);
  AckMessage ack{42, 1234, oracle::random_pose(rng, 1.0, 2.0)};
  AckMessage ack2 = decode_ack(encode_ack(ack));
  CHECK(ack2.agent_id == 42);
  CHECK(ack2.frame_id == 1234);
  CHECK(ack2.pose.quat().coeffs() == ack.pose.quat().coeffs());

  ResyncMessage rs{7, 99};
  ResyncMessage rs2 = decode_resync(encode_resync(rs));
  CHECK(rs2.agent_id == 7);
  CHECK(rs2.last_frame_id == 99);
}

TEST_CASE("framing roundtrip over a memory pipe") {
  oracle::Rng rng(223);
  MemoryStream pipe;
  std::vector<KeyframeMessage> sent;
  for (int i = 0; i < 5; ++i) {
    sent.push_back(random_message(rng));
    frame_message(pipe, MsgType::keyframe,
                  encode_keyframe_message(sent.back()));
  }
  FrameReader reader(pipe);
  for (int i = 0; i < 5; ++i) {
    auto frame = reader.next();
    REQUIRE(frame.has_value());
    CHECK(frame->type == MsgType::keyframe);
    KeyframeMessage m = decode_keyframe_message(frame->payload);
    CHECK(m.frame_id == sent[i].frame_id);
  }
  CHECK_FALSE(reader.next().has_value());
  CHECK(reader.frames_dropped() == 0);
}

TEST_CASE("a flipped payload bit loses only that frame") {
  oracle::Rng rng(227);
  MemoryStream pipe;
  KeyframeMessage a = random_message(rng);
  KeyframeMessage b = random_message(rng);
  frame_message(pipe, MsgType::keyframe, encode_keyframe_message(a));
  std::size_t first_len = pipe.buffer().size();
  frame_message(pipe, MsgType::keyframe, encode_keyframe_message(b));
  // Flip one bit inside the first frame's payload.
  pipe.buffer()[20] ^= 0x10;

  FrameReader reader(pipe);
  auto frame = reader.next();
  REQUIRE(frame.has_value());
  KeyframeMessage got = decode_keyframe_message(frame->payload);
  CHECK(got.frame_id == b.frame_id);
  CHECK_FALSE(reader.next().has_value());
  CHECK(reader.frames_dropped() >= 1);
  (void)first_len;
}

TEST_CASE("garbage prefix resynchronizes") {
  oracle::Rng rng(229);
  MemoryStream pipe;
  for (int i = 0; i < 37; ++i)
    pipe.buffer().push_back(std::uint8_t(rng.uniform(0, 255)));
  KeyframeMessage m = random_message(rng);
  frame_message(pipe, MsgType::keyframe, encode_keyframe_message(m));
  FrameReader reader(pipe);
  auto frame = reader.next();
  REQUIRE(frame.has_value());
  CHECK(decode_keyframe_message(frame->payload).frame_id == m.frame_id);
}

TEST_CASE("version mismatch is a session error") {
  MemoryStream pipe;
  frame_message(pipe, MsgType::ack, encode_ack({1, 2, Pose::identity()}));
  pipe.buffer()[4] = 0x09;  // bump the version field
  FrameReader reader(pipe);
  CHECK_THROWS(reader.next());
}

TEST_SUITE_END();
