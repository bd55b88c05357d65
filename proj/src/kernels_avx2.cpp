// AVX2 variants of the tile reduction kernels. This translation unit is
// compiled with -mavx2 and only reached through the runtime dispatcher.

#include "pslam/kernels.hpp"

#if (defined(__x86_64__) || defined(_M_X64) || defined(__i386__)) && \
    defined(__AVX2__)
#define PSLAM_HAVE_AVX2_TU 1
#include <immintrin.h>

#include <bit>
#else
#define PSLAM_HAVE_AVX2_TU 0
#endif

namespace pslam::kernels {

#if PSLAM_HAVE_AVX2_TU

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

DepthSums depth_sums_avx2(const float* depth, const double* tan_x,
                          const double* tan_y, int stride, int w, int h) {
  DepthSums out;
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  __m256d sxz = zero, syz = zero, sz = zero, szz = zero;
  std::int64_t valid = 0;
  const int w4 = w & ~3;
  for (int r = 0; r < h; ++r) {
    const float* dz = depth + std::int64_t(r) * stride;
    const double* tx = tan_x + std::int64_t(r) * stride;
    const double* ty = tan_y + std::int64_t(r) * stride;
    int c = 0;
    for (; c < w4; c += 4) {
      __m256d z = _mm256_cvtps_pd(_mm_loadu_ps(dz + c));
      __m256d mask = _mm256_cmp_pd(z, zero, _CMP_GT_OQ);
      int bits = _mm256_movemask_pd(mask);
      if (bits == 0) continue;
      valid += std::popcount(unsigned(bits));
      // Avoid div-by-zero lanes before masking.
      __m256d zsafe = _mm256_blendv_pd(one, z, mask);
      __m256d iz = _mm256_and_pd(_mm256_div_pd(one, zsafe), mask);
      __m256d vx = _mm256_loadu_pd(tx + c);
      __m256d vy = _mm256_loadu_pd(ty + c);
      sxz = _mm256_add_pd(sxz, _mm256_mul_pd(vx, iz));
      syz = _mm256_add_pd(syz, _mm256_mul_pd(vy, iz));
      sz = _mm256_add_pd(sz, iz);
      szz = _mm256_add_pd(szz, _mm256_mul_pd(iz, iz));
    }
    for (; c < w; ++c) {
      double z = dz[c];
      if (z > 0.0) {
        double iz = 1.0 / z;
        out.sxz += tx[c] * iz;
        out.syz += ty[c] * iz;
        out.sz += iz;
        out.szz += iz * iz;
        ++valid;
      }
    }
  }
  out.sxz += hsum(sxz);
  out.syz += hsum(syz);
  out.sz += hsum(sz);
  out.szz += hsum(szz);
  out.valid = valid;
  return out;
}

FullSums full_sums_avx2(const float* depth, const double* tan_x,
                        const double* tan_y, int stride, int w, int h) {
  FullSums out;
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  __m256d sxx = zero, sxy = zero, syy = zero, sx = zero, sy = zero;
  __m256d sxz = zero, syz = zero, sz = zero, szz = zero;
  std::int64_t valid = 0;
  const int w4 = w & ~3;
  for (int r = 0; r < h; ++r) {
    const float* dz = depth + std::int64_t(r) * stride;
    const double* tx = tan_x + std::int64_t(r) * stride;
    const double* ty = tan_y + std::int64_t(r) * stride;
    int c = 0;
    for (; c < w4; c += 4) {
      __m256d z = _mm256_cvtps_pd(_mm_loadu_ps(dz + c));
      __m256d mask = _mm256_cmp_pd(z, zero, _CMP_GT_OQ);
      int bits = _mm256_movemask_pd(mask);
      if (bits == 0) continue;
      valid += std::popcount(unsigned(bits));
      __m256d zsafe = _mm256_blendv_pd(one, z, mask);
      __m256d iz = _mm256_and_pd(_mm256_div_pd(one, zsafe), mask);
      __m256d vx = _mm256_and_pd(_mm256_loadu_pd(tx + c), mask);
      __m256d vy = _mm256_and_pd(_mm256_loadu_pd(ty + c), mask);
      sxx = _mm256_add_pd(sxx, _mm256_mul_pd(vx, vx));
      sxy = _mm256_add_pd(sxy, _mm256_mul_pd(vx, vy));
      syy = _mm256_add_pd(syy, _mm256_mul_pd(vy, vy));
      sx = _mm256_add_pd(sx, vx);
      sy = _mm256_add_pd(sy, vy);
      sxz = _mm256_add_pd(sxz, _mm256_mul_pd(vx, iz));
      syz = _mm256_add_pd(syz, _mm256_mul_pd(vy, iz));
      sz = _mm256_add_pd(sz, iz);
      szz = _mm256_add_pd(szz, _mm256_mul_pd(iz, iz));
    }
    for (; c < w; ++c) {
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
        out.d.sxz += x * iz;
        out.d.syz += y * iz;
        out.d.sz += iz;
        out.d.szz += iz * iz;
        ++valid;
      }
    }
  }
  out.s.sxx += hsum(sxx);
  out.s.sxy += hsum(sxy);
  out.s.syy += hsum(syy);
  out.s.sx += hsum(sx);
  out.s.sy += hsum(sy);
  out.d.sxz += hsum(sxz);
  out.d.syz += hsum(syz);
  out.d.sz += hsum(sz);
  out.d.szz += hsum(szz);
  out.s.n = valid;
  out.d.valid = valid;
  return out;
}

double residual_sumsq_avx2(const float* depth, const double* tan_x,
                           const double* tan_y, int stride, int w, int h,
                           double a, double b, double c, double d,
                           std::int64_t* valid_out) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vd = _mm256_set1_pd(d);
  __m256d acc = zero;
  double ssq = 0.0;
  std::int64_t valid = 0;
  const int w4 = w & ~3;
  for (int r = 0; r < h; ++r) {
    const float* dz = depth + std::int64_t(r) * stride;
    const double* tx = tan_x + std::int64_t(r) * stride;
    const double* ty = tan_y + std::int64_t(r) * stride;
    int col = 0;
    for (; col < w4; col += 4) {
      __m256d z = _mm256_cvtps_pd(_mm_loadu_ps(dz + col));
      __m256d mask = _mm256_cmp_pd(z, zero, _CMP_GT_OQ);
      int bits = _mm256_movemask_pd(mask);
      if (bits == 0) continue;
      valid += std::popcount(unsigned(bits));
      __m256d vx = _mm256_loadu_pd(tx + col);
      __m256d vy = _mm256_loadu_pd(ty + col);
      __m256d plane = _mm256_add_pd(
          _mm256_add_pd(_mm256_mul_pd(va, vx), _mm256_mul_pd(vb, vy)), vc);
      __m256d res = _mm256_add_pd(_mm256_mul_pd(z, plane), vd);
      res = _mm256_and_pd(res, mask);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(res, res));
    }
    for (; col < w; ++col) {
      double z = dz[col];
      if (z > 0.0) {
        double res = z * (a * tx[col] + b * ty[col] + c) + d;
        ssq += res * res;
        ++valid;
      }
    }
  }
  if (valid_out) *valid_out = valid;
  return ssq + hsum(acc);
}

}  // namespace

const Ops* avx2_ops_internal() {
  static const Ops ops{depth_sums_avx2, full_sums_avx2, residual_sumsq_avx2};
  return &ops;
}

#else

const Ops* avx2_ops_internal() { return nullptr; }

#endif  // PSLAM_HAVE_AVX2_TU

}  // namespace pslam::kernels
