#include "pslam/plane_fit.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <deque>

namespace pslam {

TanTables::TanTables(const CameraIntrinsics& intr)
    : width_(intr.width), height_(intr.height) {
  const std::size_t n = std::size_t(width_) * height_;
  tan_x_.resize(n);
  tan_y_.resize(n);
  for (int y = 0; y < height_; ++y) {
    double ty = intr.tan_y(y);
    for (int x = 0; x < width_; ++x) {
      tan_x_[std::size_t(y) * width_ + x] = intr.tan_x(x);
      tan_y_[std::size_t(y) * width_ + x] = ty;
    }
  }
  const std::size_t iw = std::size_t(width_) + 1;
  const std::size_t ih = std::size_t(height_) + 1;
  auto build = [&](std::vector<double>& integral, auto value) {
    integral.assign(iw * ih, 0.0);
    for (int y = 0; y < height_; ++y) {
      double row = 0.0;
      for (int x = 0; x < width_; ++x) {
        row += value(x, y);
        integral[(y + 1) * iw + (x + 1)] = integral[y * iw + (x + 1)] + row;
      }
    }
  };
  build(int_xx_, [&](int x, int y) {
    double v = tan_x_at(x, y);
    return v * v;
  });
  build(int_xy_, [&](int x, int y) { return tan_x_at(x, y) * tan_y_at(x, y); });
  build(int_yy_, [&](int x, int y) {
    double v = tan_y_at(x, y);
    return v * v;
  });
  build(int_x_, [&](int x, int y) { return tan_x_at(x, y); });
  build(int_y_, [&](int x, int y) { return tan_y_at(x, y); });
}

double TanTables::rect_sum(const std::vector<double>& integral,
                           const TileRect& t) const {
  const std::size_t iw = std::size_t(width_) + 1;
  auto at = [&](int x, int y) { return integral[std::size_t(y) * iw + x]; };
  return at(t.x + t.w, t.y + t.h) - at(t.x, t.y + t.h) - at(t.x + t.w, t.y) +
         at(t.x, t.y);
}

kernels::StaticSums TanTables::tile_static_sums(const TileRect& t) const {
  kernels::StaticSums s;
  s.sxx = rect_sum(int_xx_, t);
  s.sxy = rect_sum(int_xy_, t);
  s.syy = rect_sum(int_yy_, t);
  s.sx = rect_sum(int_x_, t);
  s.sy = rect_sum(int_y_, t);
  s.n = t.area();
  return s;
}

TanTables precompute_tables(const CameraIntrinsics& intr) {
  return TanTables(intr);
}

namespace {

constexpr int kMinFitPoints = 4;
constexpr double kDegenerateEigGap = 1e-12;

Eigen::Matrix4d scatter_matrix(const kernels::StaticSums& s,
                               const kernels::DepthSums& d) {
  Eigen::Matrix4d m;
  m << s.sxx, s.sxy, s.sx, d.sxz,
       s.sxy, s.syy, s.sy, d.syz,
       s.sx, s.sy, double(s.n), d.sz,
       d.sxz, d.syz, d.sz, d.szz;
  return m;
}

}  // namespace

FitOutcome fit_plane_tile(const DepthImage& depth, const TileRect& tile,
                          const TanTables& tables,
                          bool force_full_accumulation) {
  FitOutcome out;
  const auto& ops = kernels::active();
  const std::size_t off = std::size_t(tile.y) * depth.width + tile.x;
  const float* dz = depth.depths.data() + off;
  const double* tx = tables.tan_x() + off;
  const double* ty = tables.tan_y() + off;

  kernels::StaticSums stat;
  kernels::DepthSums dyn;
  if (force_full_accumulation) {
    kernels::FullSums full =
        ops.full_sums(dz, tx, ty, depth.width, tile.w, tile.h);
    stat = full.s;
    dyn = full.d;
  } else {
    dyn = ops.depth_sums(dz, tx, ty, depth.width, tile.w, tile.h);
    if (dyn.valid == tile.area()) {
      stat = tables.tile_static_sums(tile);
    } else {
      kernels::FullSums full =
          ops.full_sums(dz, tx, ty, depth.width, tile.w, tile.h);
      stat = full.s;
      dyn = full.d;
    }
  }

  if (dyn.valid < kMinFitPoints) {
    out.status = FitStatus::insufficient_data;
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(scatter_matrix(stat, dyn));
  const Eigen::Vector4d& ev = eig.eigenvalues();  // ascending
  // Two (near-)coincident smallest eigenvalues mean the data does not pin
  // down a plane; the gap is judged against the matrix scale.
  double scale = std::max(std::abs(ev[3]), 1e-300);
  if (ev[1] - ev[0] <= kDegenerateEigGap * scale) {
    out.status = FitStatus::degenerate_fit;
    return out;
  }
  Eigen::Vector4d v = eig.eigenvectors().col(0);
  double nabc = v.head<3>().norm();
  if (nabc < 1e-12) {
    out.status = FitStatus::degenerate_fit;
    return out;
  }
  v /= nabc;
  Plane plane = Plane::from_coeffs(v);

  std::int64_t valid = 0;
  double ssq = ops.residual_sumsq(dz, tx, ty, depth.width, tile.w, tile.h,
                                  plane.n.x(), plane.n.y(), plane.n.z(),
                                  plane.d, &valid);
  out.status = FitStatus::ok;
  out.fit.plane = plane;
  out.fit.tile = tile;
  out.fit.rms_error = std::sqrt(ssq / double(valid));
  out.fit.point_count = int(valid);
  return out;
}

bool corner_depth_check(const DepthImage& depth, const TileRect& tile) {
  return depth.valid_at(tile.x, tile.y) &&
         depth.valid_at(tile.x + tile.w - 1, tile.y) &&
         depth.valid_at(tile.x, tile.y + tile.h - 1) &&
         depth.valid_at(tile.x + tile.w - 1, tile.y + tile.h - 1);
}

bool planarity_check(const DepthImage& depth, const TileRect& tile,
                     const CameraIntrinsics& intr, double tol) {
  const std::array<Eigen::Vector2i, 4> px = {
      Eigen::Vector2i(tile.x, tile.y),
      Eigen::Vector2i(tile.x + tile.w - 1, tile.y),
      Eigen::Vector2i(tile.x, tile.y + tile.h - 1),
      Eigen::Vector2i(tile.x + tile.w - 1, tile.y + tile.h - 1)};
  std::array<Vec3, 4> pts;
  for (int i = 0; i < 4; ++i) {
    double z = depth.at(px[i].x(), px[i].y());
    pts[i] = backproject(intr, px[i].cast<double>(), z);
  }
  Vec3 normal = (pts[1] - pts[0]).cross(pts[2] - pts[0]);
  double len = normal.norm();
  if (len < 1e-12) return false;  // collinear corner triple
  double dist = std::abs(normal.dot(pts[3] - pts[0])) / len;
  return dist <= tol;
}

namespace {

double avg_corner_depth(const DepthImage& depth, const TileRect& t) {
  return 0.25 * (double(depth.at(t.x, t.y)) +
                 double(depth.at(t.x + t.w - 1, t.y)) +
                 double(depth.at(t.x, t.y + t.h - 1)) +
                 double(depth.at(t.x + t.w - 1, t.y + t.h - 1)));
}

void subdivide(const TileRect& t, std::vector<TileRect>& out) {
  int w1 = t.w / 2, w2 = t.w - w1;
  int h1 = t.h / 2, h2 = t.h - h1;
  out.push_back({t.x, t.y, w1, h1});
  out.push_back({t.x + w1, t.y, w2, h1});
  out.push_back({t.x, t.y + h1, w1, h2});
  out.push_back({t.x + w1, t.y + h1, w2, h2});
}

std::int64_t count_valid(const DepthImage& depth) {
  std::int64_t n = 0;
  for (float z : depth.depths)
    if (z > 0.0f) ++n;
  return n;
}

std::int64_t count_valid_in(const DepthImage& depth, const TileRect& t) {
  std::int64_t n = 0;
  for (int y = t.y; y < t.y + t.h; ++y) {
    const float* row = depth.row(y);
    for (int x = t.x; x < t.x + t.w; ++x)
      if (row[x] > 0.0f) ++n;
  }
  return n;
}

constexpr std::size_t kCloudHeaderBytes = 4;
constexpr std::size_t kBytesPerFit = 32;

}  // namespace

CompressResult compress(const DepthImage& depth, const CameraIntrinsics& intr,
                        const CompressionConfig& cfg, const TanTables& tables,
                        Clock* clock) {
  WallClock wall;
  Clock* clk = clock ? clock : &wall;
  const double t0 = clk->now();

  CompressResult res;
  res.stats.total_valid_pixels = count_valid(depth);

  // Level 0: cover the image with B x B tiles, row-major; ragged right and
  // bottom edges get clipped tiles.
  std::deque<TileRect> current;
  for (int y = 0; y < depth.height; y += cfg.initial_tile) {
    int h = std::min(cfg.initial_tile, depth.height - y);
    for (int x = 0; x < depth.width; x += cfg.initial_tile) {
      int w = std::min(cfg.initial_tile, depth.width - x);
      current.push_back({x, y, w, h});
    }
  }

  const std::int64_t min_area_to_split = 4LL * cfg.min_tile * cfg.min_tile;
  std::size_t bytes = kCloudHeaderBytes;
  std::vector<TileRect> next;
  int level = 0;
  bool stop = false;

  while (!current.empty() && !stop) {
    res.stats.per_level_fits.push_back(0);
    next.clear();
    while (!current.empty()) {
      if (cfg.time_budget && clk->now() - t0 >= *cfg.time_budget) {
        stop = true;
        break;
      }
      TileRect tile = current.front();
      current.pop_front();
      ++res.stats.tiles_processed;
      clk->charge_pixels(tile.area());

      bool accept = false;
      FitOutcome fit;
      if (corner_depth_check(depth, tile)) {
        double avg_z = avg_corner_depth(depth, tile);
        double tol = cfg.epsilon * avg_z;
        if (planarity_check(depth, tile, intr, cfg.planarity_factor * tol)) {
          fit = fit_plane_tile(depth, tile, tables);
          accept = fit.ok() && fit.fit.rms_error < tol;
        }
      }

      if (accept) {
        if (cfg.byte_budget && bytes + kBytesPerFit > *cfg.byte_budget) {
          stop = true;
          break;
        }
        res.cloud.fits.push_back(fit.fit);
        bytes += kBytesPerFit;
        res.stats.per_level_fits.back()++;
        res.stats.covered_valid_pixels += count_valid_in(depth, tile);
      } else if (tile.area() > min_area_to_split) {
        subdivide(tile, next);
        ++res.stats.subdivisions;
      }
    }
    ++level;
    if (cfg.level_cap > 0 && level >= cfg.level_cap) break;
    current.assign(next.begin(), next.end());
  }

  res.stats.wall_seconds = clk->now() - t0;
  return res;
}

}  // namespace pslam
