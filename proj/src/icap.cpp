#include "pslam/icap.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace pslam {

namespace {

constexpr double kNormalRankTol = 1e-6;

double coeff_dist_sq(const Plane& a, const Plane& b, double d_scale) {
  double dd = (a.d - b.d) / d_scale;
  return (a.n - b.n).squaredNorm() + dd * dd;
}

Pose solve_oriented(const std::vector<std::pair<Plane, Plane>>& matches,
                    const std::vector<double>& sign) {
  const int n = int(matches.size());
  Mat3 cov = Mat3::Zero();
  for (int i = 0; i < n; ++i)
    cov += sign[i] * matches[i].second.n * matches[i].first.n.transpose();
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant();
  Mat3 R = svd.matrixU() * fix * svd.matrixV().transpose();

  // Rank check on the source normals (sign flips do not affect rank).
  Eigen::MatrixXd N(n, 3);
  for (int i = 0; i < n; ++i) N.row(i) = matches[i].first.n.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> nsvd(N);
  if (nsvd.singularValues().minCoeff() <= kNormalRankTol)
    throw AlignmentError(AlignErrorKind::degenerate_geometry,
                         "plane normals do not span 3D");

  // s_i (n_dst, d_dst) = (R n_src, d_src - t . R n_src), so
  // t . (R n_src) = d_src - s_i d_dst.
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    A.row(i) = (R * matches[i].first.n).transpose();
    rhs[i] = matches[i].first.d - sign[i] * matches[i].second.d;
  }
  Vec3 t = (A.transpose() * A).ldlt().solve(A.transpose() * rhs);
  return Pose(R, t);
}

}  // namespace

Pose align_plane_pairs(const std::vector<std::pair<Plane, Plane>>& matches,
                       const std::optional<Mat3>& orient_hint) {
  const int n = int(matches.size());
  if (n < 3)
    throw AlignmentError(AlignErrorKind::too_few_matches,
                         "need at least 3 plane matches");

  // Canonicalization fixes each plane's sign independently, so a pair may
  // disagree by a joint flip of (n, d). Resolve per-pair signs against the
  // best available rotation before the SVD solve.
  std::vector<double> sign(n, 1.0);
  auto resolve = [&](const Mat3& R) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      double s =
          matches[i].second.n.dot(R * matches[i].first.n) < 0.0 ? -1.0 : 1.0;
      if (s != sign[i]) {
        sign[i] = s;
        changed = true;
      }
    }
    return changed;
  };

  if (orient_hint) resolve(*orient_hint);
  Pose T = solve_oriented(matches, sign);
  for (int round = 0; round < 5; ++round) {
    if (!resolve(T.rotation())) break;
    T = solve_oriented(matches, sign);
  }
  return T;
}

std::pair<int, double> closest_plane(const Plane& p, const PlaneCloud& cloud,
                                     const Pose& T, double d_scale) {
  Plane moved = transform_plane(T, p);
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < int(cloud.fits.size()); ++j) {
    double dist = coeff_dist_sq(moved, cloud.fits[j].plane, d_scale);
    if (dist < best_d) {
      best_d = dist;
      best = j;
    }
  }
  return {best, best_d};
}

AlignmentResult icap(const PlaneCloud& src, const PlaneCloud& dst,
                     const Pose& T0, const IcapParams& params) {
  AlignmentResult res;
  res.T = T0;
  const double gate_sq = params.match_gate * params.match_gate;

  for (int it = 0; it < params.max_iters; ++it) {
    res.iterations = it + 1;
    std::vector<PlaneMatch> matches;
    std::vector<std::pair<Plane, Plane>> pairs;
    double dist_sum = 0.0;
    for (int l = 0; l < int(src.fits.size()); ++l) {
      auto [j, dist] = closest_plane(src.fits[l].plane, dst, res.T,
                                     params.d_scale);
      if (j < 0 || dist > gate_sq) continue;
      matches.push_back({l, j});
      pairs.emplace_back(src.fits[l].plane, dst.fits[j].plane);
      dist_sum += dist;
    }
    if (int(pairs.size()) < 3)
      throw AlignmentError(AlignErrorKind::too_few_matches,
                           "fewer than 3 gated correspondences");

    Pose next = align_plane_pairs(pairs, res.T.rotation());
    double delta = (next.matrix() - res.T.matrix()).squaredNorm();
    res.T = next;
    res.matches = std::move(matches);
    res.residual = dist_sum / double(pairs.size());
    if (delta < params.tau_T) {
      res.converged = true;
      break;
    }
  }

  // Residual re-evaluated at the final transform and correspondences.
  if (!res.matches.empty()) {
    double dist_sum = 0.0;
    for (const PlaneMatch& m : res.matches) {
      dist_sum += coeff_dist_sq(transform_plane(res.T, src.fits[m.idx_src].plane),
                                dst.fits[m.idx_dst].plane, params.d_scale);
    }
    res.residual = dist_sum / double(res.matches.size());
  }
  return res;
}

AlignmentResult align_clouds(const PlaneCloud& src, const PlaneCloud& dst,
                             const Pose& T0, const IcapParams& params) {
  if (src.fits.size() <= dst.fits.size()) return icap(src, dst, T0, params);
  AlignmentResult r = icap(dst, src, pose_inverse(T0), params);
  r.T = pose_inverse(r.T);
  for (PlaneMatch& m : r.matches) std::swap(m.idx_src, m.idx_dst);
  return r;
}

Mat6 alignment_information(const AlignmentResult& result,
                           const InformationParams& params) {
  if (!result.converged)
    throw std::invalid_argument(
        "alignment_information: result did not converge");
  if (result.matches.size() < 3)
    throw std::invalid_argument(
        "alignment_information: fewer than 3 matches");
  return params.kappa / (result.residual + params.epsilon0) * Mat6::Identity();
}

}  // namespace pslam
