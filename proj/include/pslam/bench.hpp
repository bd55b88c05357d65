#pragma once

#include "pslam/plane_fit.hpp"
#include "pslam/scene.hpp"

#include <iosfwd>
#include <vector>

namespace pslam {

/// One row of the benchmark CSVs: the compression knobs and the measured
/// outputs, averaged over the sampled frames.
struct BenchRecord {
  double eps = 0.0;
  int initial_tile = 0;
  int min_tile = 0;
  double budget_ms = -1.0;  // -1 = unbounded
  int level_cap = 0;        // 0 = unlimited
  double coverage_pct = 0.0;
  double mean_rms_mm = 0.0;
  double bytes = 0.0;
  double fits = 0.0;
  double wall_ms = 0.0;
};

/// CSV header shared by every bench:
/// eps,initial_tile,min_tile,budget_ms,level_cap,coverage_pct,mean_rms_mm,bytes,fits,wall_ms
void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& rows);

struct BenchSetup {
  int sample_frames = 5;     // frames sampled evenly along the trajectory
  std::uint64_t seed = 1;    // noise seed
};

/// Coverage/bytes/time sweep over (epsilon, time budget) pairs. Budgets are
/// measured on the deterministic workload clock, so rows reproduce bit for
/// bit under a fixed seed.
std::vector<BenchRecord> bench_tradeoff(const SceneSpec& spec,
                                        const std::vector<double>& eps_list,
                                        const std::vector<double>& budgets_ms,
                                        const BenchSetup& setup = {});

/// Uniform-tile fitting at fixed block sizes, no subdivision: the
/// rate-distortion curve of error versus serialized size.
std::vector<BenchRecord> bench_rate_distortion(
    const SceneSpec& spec, const std::vector<int>& block_sizes,
    const BenchSetup& setup = {});

/// Quadtree depth sweep with the 24 px preset: how much area stays
/// unfitted as the level cap grows.
std::vector<BenchRecord> bench_quadtree_levels(const SceneSpec& spec,
                                               const std::vector<int>& caps,
                                               const BenchSetup& setup = {});

}  // namespace pslam
