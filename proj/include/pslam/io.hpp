#pragma once

#include "pslam/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace pslam {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Depth rasters are stored as 16-bit binary PGM (P5, maxval 65535,
/// big-endian samples per the netpbm convention) with a `# scale mm`
/// comment: sample value = depth in millimeters, 0 = invalid.
void write_depth_pgm(const std::filesystem::path& path, const DepthImage& img);
DepthImage read_depth_pgm(const std::filesystem::path& path);

/// Cloud files are exactly the encode_cloud byte layout.
void write_cloud_file(const std::filesystem::path& path, const PlaneCloud& c);
PlaneCloud read_cloud_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes);

}  // namespace pslam
