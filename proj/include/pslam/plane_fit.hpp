#pragma once

#include "pslam/clock.hpp"
#include "pslam/geometry.hpp"
#include "pslam/kernels.hpp"

#include <optional>
#include <vector>

namespace pslam {

/// Per-pixel viewing-ray tangents plus prefix sums of the depth-independent
/// scatter entries. Everything here is a function of intrinsics only and is
/// computed once per camera. For a fully valid tile the prefix sums supply
/// the six static scatter entries in O(1), so the per-fit work reduces to
/// the four depth-dependent accumulations.
class TanTables {
 public:
  TanTables() = default;
  explicit TanTables(const CameraIntrinsics& intr);

  int width() const { return width_; }
  int height() const { return height_; }
  const double* tan_x() const { return tan_x_.data(); }
  const double* tan_y() const { return tan_y_.data(); }
  double tan_x_at(int x, int y) const {
    return tan_x_[std::size_t(y) * width_ + x];
  }
  double tan_y_at(int x, int y) const {
    return tan_y_[std::size_t(y) * width_ + x];
  }

  /// Depth-independent scatter entries over every pixel of the tile.
  kernels::StaticSums tile_static_sums(const TileRect& t) const;

  bool matches(const CameraIntrinsics& intr) const {
    return width_ == intr.width && height_ == intr.height;
  }

 private:
  double rect_sum(const std::vector<double>& integral, const TileRect& t) const;

  int width_ = 0;
  int height_ = 0;
  std::vector<double> tan_x_;
  std::vector<double> tan_y_;
  // (width+1) x (height+1) inclusive prefix sums.
  std::vector<double> int_xx_, int_xy_, int_yy_, int_x_, int_y_;
};

enum class FitStatus { ok, insufficient_data, degenerate_fit };

struct FitOutcome {
  FitStatus status = FitStatus::insufficient_data;
  PlaneFit fit;
  bool ok() const { return status == FitStatus::ok; }
};

struct CompressionConfig {
  int initial_tile = 80;        // B, pixels
  int min_tile = 8;             // m, pixels
  double epsilon = 0.0027;      // relative error tolerance (x avg corner depth)
  double planarity_factor = 10.0;  // planarity tol = factor * eps * avg depth
  double z_max = 10.0;          // meters
  std::optional<double> time_budget;       // seconds
  std::optional<std::size_t> byte_budget;  // serialized bytes
  int level_cap = 0;            // max quadtree levels, 0 = unlimited

  bool valid() const {
    return initial_tile >= min_tile && min_tile >= 2 && epsilon > 0.0 &&
           z_max > 0.0;
  }

  /// The paper's loose tolerance (13.1 mm at 1 m) with the small-tile sweep
  /// setup: 24 px initial tiles, 8 px minimum.
  static CompressionConfig loose_preset() {
    CompressionConfig c;
    c.epsilon = 0.0131;
    return c;
  }
  static CompressionConfig bench_preset() {
    CompressionConfig c;
    c.initial_tile = 24;
    c.min_tile = 8;
    return c;
  }
};

struct CoverageStats {
  std::int64_t covered_valid_pixels = 0;
  std::int64_t total_valid_pixels = 0;
  double wall_seconds = 0.0;
  std::vector<int> per_level_fits;
  std::int64_t tiles_processed = 0;
  std::int64_t subdivisions = 0;

  double coverage() const {
    return total_valid_pixels == 0
               ? 0.0
               : double(covered_valid_pixels) / double(total_valid_pixels);
  }
};

struct CompressResult {
  PlaneCloud cloud;
  CoverageStats stats;
};

TanTables precompute_tables(const CameraIntrinsics& intr);

/// Least-squares plane through the tile's valid depths, fitted in depth
/// space: the smallest-eigenvalue eigenvector of the 4x4 scatter of
/// monomials (tan_x, tan_y, 1, 1/Z). When every pixel of the tile is valid
/// only the four depth-dependent sums are accumulated and the static block
/// comes from the tables; `force_full_accumulation` runs the ten-sum path
/// regardless (the two must agree to machine precision).
FitOutcome fit_plane_tile(const DepthImage& depth, const TileRect& tile,
                          const TanTables& tables,
                          bool force_full_accumulation = false);

/// All four tile corners hold a valid (nonzero) depth.
bool corner_depth_check(const DepthImage& depth, const TileRect& tile);

/// Distance of the fourth corner's 3D point to the plane through the other
/// three corners' points. False when the triple is collinear.
bool planarity_check(const DepthImage& depth, const TileRect& tile,
                     const CameraIntrinsics& intr, double tol);

/// Breadth-first quadtree compression (time and byte budgeted).
CompressResult compress(const DepthImage& depth, const CameraIntrinsics& intr,
                        const CompressionConfig& cfg, const TanTables& tables,
                        Clock* clock = nullptr);

}  // namespace pslam
