#include "pslam/io.hpp"

#include "pslam/wire.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pslam {

namespace {

constexpr double kMmScale = 1000.0;
constexpr int kMaxVal = 65535;

}  // namespace

void write_depth_pgm(const std::filesystem::path& path,
                     const DepthImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  os << "P5\n# scale mm\n" << img.width << " " << img.height << "\n"
     << kMaxVal << "\n";
  std::vector<std::uint8_t> row(std::size_t(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    const float* src = img.row(y);
    for (int x = 0; x < img.width; ++x) {
      double mm = std::round(double(src[x]) * kMmScale);
      std::uint16_t v = 0;
      if (mm > 0.0) v = std::uint16_t(std::min(mm, double(kMaxVal)));
      row[2 * x] = std::uint8_t(v >> 8);  // big-endian per PGM
      row[2 * x + 1] = std::uint8_t(v & 0xff);
    }
    os.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!os) throw IoError("write failed: " + path.string());
}

DepthImage read_depth_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path.string());

  auto next_token = [&]() -> std::string {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
      if (c == '#') {
        while ((c = is.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(char(c));
    }
    return tok;
  };

  if (next_token() != "P5") throw IoError("not a binary PGM: " + path.string());
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval != kMaxVal)
    throw IoError("unsupported PGM geometry (need 16-bit): " + path.string());
  // Exactly one whitespace byte separates the header from the samples; the
  // token scanner has already consumed it.

  DepthImage img(w, h);
  std::vector<std::uint8_t> row(std::size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!is) throw IoError("truncated PGM data: " + path.string());
    float* dst = img.depths.data() + std::size_t(y) * w;
    for (int x = 0; x < w; ++x) {
      std::uint16_t v = std::uint16_t((row[2 * x] << 8) | row[2 * x + 1]);
      dst[x] = float(double(v) / kMmScale);
    }
  }
  return img;
}

void write_cloud_file(const std::filesystem::path& path, const PlaneCloud& c) {
  write_file_bytes(path, encode_cloud(c));
}

PlaneCloud read_cloud_file(const std::filesystem::path& path) {
  return decode_cloud(read_file_bytes(path));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes(std::size_t(is.tellg()));
  is.seekg(0);
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!is) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace pslam
