#include "pslam/kernels.hpp"

namespace pslam::kernels {

namespace {

DepthSums depth_sums_scalar(const float* depth, const double* tan_x,
                            const double* tan_y, int stride, int w, int h) {
  DepthSums out;
  for (int r = 0; r < h; ++r) {
    const float* dz = depth + std::int64_t(r) * stride;
    const double* tx = tan_x + std::int64_t(r) * stride;
    const double* ty = tan_y + std::int64_t(r) * stride;
    for (int c = 0; c < w; ++c) {
      double z = dz[c];
      if (z > 0.0) {
        double iz = 1.0 / z;
        out.sxz += tx[c] * iz;
        out.syz += ty[c] * iz;
        out.sz += iz;
        out.szz += iz * iz;
        ++out.valid;
      }
    }
  }
  return out;
}

FullSums full_sums_scalar(const float* depth, const double* tan_x,
                          const double* tan_y, int stride, int w, int h) {
  FullSums out;
  for (int r = 0; r < h; ++r) {
    const float* dz = depth + std::int64_t(r) * stride;
    const double* tx = tan_x + std::int64_t(r) * stride;
    const double* ty = tan_y + std::int64_t(r) * stride;
    for (int c = 0; c < w; ++c) {
      double z = dz[c];
      if (z > 0.0) {
        double x = tx[c];
        double y = ty[c];
        double iz = 1.0 / z;
        out.s.sxx += x * x;
        out.s.sxy += x * y;
        out.s.syy += y * y;
        out.s.sx += x;
        out.s.sy += y;
        ++out.s.n;
        out.d.sxz += x * iz;
        out.d.syz += y * iz;
        out.d.sz += iz;
        out.d.szz += iz * iz;
        ++out.d.valid;
      }
    }
  }
  return out;
}

double residual_sumsq_scalar(const float* depth, const double* tan_x,
                             const double* tan_y, int stride, int w, int h,
                             double a, double b, double c, double d,
                             std::int64_t* valid) {
  double ssq = 0.0;
  std::int64_t n = 0;
  for (int r = 0; r < h; ++r) {
    const float* dz = depth + std::int64_t(r) * stride;
    const double* tx = tan_x + std::int64_t(r) * stride;
    const double* ty = tan_y + std::int64_t(r) * stride;
    for (int col = 0; col < w; ++col) {
      double z = dz[col];
      if (z > 0.0) {
        double res = z * (a * tx[col] + b * ty[col] + c) + d;
        ssq += res * res;
        ++n;
      }
    }
  }
  if (valid) *valid = n;
  return ssq;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{depth_sums_scalar, full_sums_scalar,
                       residual_sumsq_scalar};
  return ops;
}

}  // namespace pslam::kernels
