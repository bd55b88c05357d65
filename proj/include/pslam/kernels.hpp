#pragma once

#include <cstdint>
#include <string_view>

namespace pslam::kernels {

// Tile reductions feeding the depth-space plane fit. All kernels walk a
// w x h window of a row-major image (stride = image width), skip pixels
// with depth <= 0, and accumulate in double precision. The scalar kernels
// are the reference semantics; SIMD variants must match them within
// reassociation error and are equivalence-tested against them.

/// The four scatter-matrix entries that depend on measured depth,
/// plus the count of valid pixels.
struct DepthSums {
  double sxz = 0.0;  // sum tan_x / Z
  double syz = 0.0;  // sum tan_y / Z
  double sz = 0.0;   // sum 1 / Z
  double szz = 0.0;  // sum 1 / Z^2
  std::int64_t valid = 0;
};

/// The six depth-independent scatter entries over the same valid pixels.
struct StaticSums {
  double sxx = 0.0;  // sum tan_x^2
  double sxy = 0.0;  // sum tan_x tan_y
  double syy = 0.0;  // sum tan_y^2
  double sx = 0.0;   // sum tan_x
  double sy = 0.0;   // sum tan_y
  std::int64_t n = 0;
};

struct FullSums {
  StaticSums s;
  DepthSums d;
};

using DepthSumsFn = DepthSums (*)(const float* depth, const double* tan_x,
                                  const double* tan_y, int stride, int w,
                                  int h);
using FullSumsFn = FullSums (*)(const float* depth, const double* tan_x,
                                const double* tan_y, int stride, int w, int h);
/// Sum of squared orthogonal point-to-plane residuals over valid pixels:
/// r = Z * (a tan_x + b tan_y + c) + d. Writes the valid count.
using ResidualFn = double (*)(const float* depth, const double* tan_x,
                              const double* tan_y, int stride, int w, int h,
                              double a, double b, double c, double d,
                              std::int64_t* valid);

struct Ops {
  DepthSumsFn depth_sums;
  FullSumsFn full_sums;
  ResidualFn residual_sumsq;
};

/// Kernel set picked at first use: PSLAM_KERNELS=scalar|avx2 overrides,
/// otherwise the best variant the CPU supports.
const Ops& active();
std::string_view active_name();

const Ops& scalar_ops();

/// Named lookup for equivalence tests; nullptr when the variant is not
/// compiled in or not supported by this CPU.
const Ops* ops_by_name(std::string_view name);

bool cpu_has_avx2();

}  // namespace pslam::kernels
