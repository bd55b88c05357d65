#include "pslam/bench.hpp"

#include "pslam/wire.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace pslam {

namespace {

std::vector<double> sample_times(const SceneSpec& spec, int n) {
  std::vector<double> ts;
  if (n <= 1 || spec.trajectory.size() == 1) {
    ts.push_back(spec.t_begin());
    return ts;
  }
  double t0 = spec.t_begin(), t1 = spec.t_end();
  for (int i = 0; i < n; ++i)
    ts.push_back(t0 + (t1 - t0) * double(i) / double(n - 1));
  return ts;
}

struct Accum {
  double coverage = 0.0, rms_mm = 0.0, bytes = 0.0, fits = 0.0, wall = 0.0;
  int n = 0;

  void add(const CompressResult& r) {
    coverage += 100.0 * r.stats.coverage();
    double ssq = 0.0;
    std::int64_t pts = 0;
    for (const PlaneFit& f : r.cloud.fits) {
      ssq += f.rms_error * f.rms_error * double(f.point_count);
      pts += f.point_count;
    }
    rms_mm += pts == 0 ? 0.0 : 1000.0 * std::sqrt(ssq / double(pts));
    bytes += double(cloud_encoded_size(r.cloud.fits.size()));
    fits += double(r.cloud.fits.size());
    wall += 1000.0 * r.stats.wall_seconds;
    ++n;
  }

  void finish(BenchRecord& rec) const {
    if (n == 0) return;
    rec.coverage_pct = coverage / n;
    rec.mean_rms_mm = rms_mm / n;
    rec.bytes = bytes / n;
    rec.fits = fits / n;
    rec.wall_ms = wall / n;
  }
};

}  // namespace

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& rows) {
  os << "eps,initial_tile,min_tile,budget_ms,level_cap,coverage_pct,"
        "mean_rms_mm,bytes,fits,wall_ms\n";
  char line[256];
  for (const BenchRecord& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%.6g,%d,%d,%.6g,%d,%.6f,%.6f,%.1f,%.1f,%.4f\n", r.eps,
                  r.initial_tile, r.min_tile, r.budget_ms, r.level_cap,
                  r.coverage_pct, r.mean_rms_mm, r.bytes, r.fits, r.wall_ms);
    os << line;
  }
}

std::vector<BenchRecord> bench_tradeoff(const SceneSpec& spec,
                                        const std::vector<double>& eps_list,
                                        const std::vector<double>& budgets_ms,
                                        const BenchSetup& setup) {
  spec.validate();
  TanTables tables(spec.intrinsics);
  std::vector<double> times = sample_times(spec, setup.sample_frames);
  std::vector<BenchRecord> rows;
  for (double eps : eps_list) {
    for (double budget : budgets_ms) {
      CompressionConfig cfg = CompressionConfig::bench_preset();
      cfg.epsilon = eps;
      cfg.time_budget = budget / 1000.0;
      BenchRecord rec;
      rec.eps = eps;
      rec.initial_tile = cfg.initial_tile;
      rec.min_tile = cfg.min_tile;
      rec.budget_ms = budget;
      Accum acc;
      for (std::size_t i = 0; i < times.size(); ++i) {
        DepthImage depth = render_depth(spec, times[i], setup.seed + i);
        WorkloadClock clock;
        acc.add(compress(depth, spec.intrinsics, cfg, tables, &clock));
      }
      acc.finish(rec);
      rows.push_back(rec);
    }
  }
  return rows;
}

std::vector<BenchRecord> bench_rate_distortion(
    const SceneSpec& spec, const std::vector<int>& block_sizes,
    const BenchSetup& setup) {
  spec.validate();
  TanTables tables(spec.intrinsics);
  std::vector<double> times = sample_times(spec, setup.sample_frames);
  std::vector<DepthImage> frames;
  for (std::size_t i = 0; i < times.size(); ++i)
    frames.push_back(render_depth(spec, times[i], setup.seed + i));

  std::vector<BenchRecord> rows;
  for (int block : block_sizes) {
    BenchRecord rec;
    rec.initial_tile = block;
    rec.min_tile = block;
    Accum acc;
    for (const DepthImage& depth : frames) {
      // Fixed-size grid, every fittable tile kept: no thresholds, no
      // subdivision.
      CompressResult r;
      r.stats.total_valid_pixels = 0;
      for (float z : depth.depths)
        if (z > 0.0f) ++r.stats.total_valid_pixels;
      for (int y = 0; y + block <= depth.height; y += block) {
        for (int x = 0; x + block <= depth.width; x += block) {
          TileRect tile{x, y, block, block};
          FitOutcome fit = fit_plane_tile(depth, tile, tables);
          if (fit.ok()) r.cloud.fits.push_back(fit.fit);
        }
      }
      acc.add(r);
    }
    acc.finish(rec);
    rec.coverage_pct = 0.0;  // not meaningful for the uniform grid
    rows.push_back(rec);
  }
  return rows;
}

std::vector<BenchRecord> bench_quadtree_levels(const SceneSpec& spec,
                                               const std::vector<int>& caps,
                                               const BenchSetup& setup) {
  spec.validate();
  TanTables tables(spec.intrinsics);
  std::vector<double> times = sample_times(spec, setup.sample_frames);
  std::vector<DepthImage> frames;
  for (std::size_t i = 0; i < times.size(); ++i)
    frames.push_back(render_depth(spec, times[i], setup.seed + i));

  std::vector<BenchRecord> rows;
  for (int cap : caps) {
    CompressionConfig cfg = CompressionConfig::bench_preset();
    cfg.min_tile = 2;  // let the tree reach its full depth under the cap
    cfg.level_cap = cap;
    BenchRecord rec;
    rec.eps = cfg.epsilon;
    rec.initial_tile = cfg.initial_tile;
    rec.min_tile = cfg.min_tile;
    rec.level_cap = cap;
    Accum acc;
    for (const DepthImage& depth : frames) {
      WorkloadClock clock;
      acc.add(compress(depth, spec.intrinsics, cfg, tables, &clock));
    }
    acc.finish(rec);
    rows.push_back(rec);
  }
  return rows;
}

}  // namespace pslam
