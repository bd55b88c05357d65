#pragma once

#include "pslam/geometry.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace pslam {

/// Correspondence between two plane clouds (source index appears once).
struct PlaneMatch {
  int idx_src = -1;
  int idx_dst = -1;
};

struct AlignmentResult {
  Pose T;                          // maps source frame into destination frame
  double residual = 0.0;           // mean squared coefficient distance
  std::vector<PlaneMatch> matches;
  int iterations = 0;
  bool converged = false;
};

enum class AlignErrorKind { too_few_matches, degenerate_geometry };

class AlignmentError : public std::runtime_error {
 public:
  AlignmentError(AlignErrorKind kind, const char* what)
      : std::runtime_error(what), kind_(kind) {}
  AlignErrorKind kind() const { return kind_; }

 private:
  AlignErrorKind kind_;
};

struct IcapParams {
  double tau_T = 1e-10;     // squared Frobenius threshold on consecutive T
  int max_iters = 50;
  double match_gate = 0.2;  // drop correspondences with distance above this
  double d_scale = 1.0;     // scene scale dividing the offset coefficient
};

/// Closed-form least-squares alignment of corresponded plane pairs
/// (source, destination). Rotation from the SVD of the normal covariance
/// with the right-handedness correction, translation from the rotated
/// source normals. `orient_hint` resolves the sign ambiguity that the
/// canonical d >= 0 representation introduces; without it the sign pattern
/// is re-estimated by a short fixed-point iteration.
/// Throws AlignmentError for fewer than 3 pairs or rank-deficient normals.
Pose align_plane_pairs(const std::vector<std::pair<Plane, Plane>>& matches,
                       const std::optional<Mat3>& orient_hint = std::nullopt);

/// Index and squared coefficient distance of the cloud plane closest to
/// transform_plane(T, p); ties break toward the lowest index.
std::pair<int, double> closest_plane(const Plane& p, const PlaneCloud& cloud,
                                     const Pose& T, double d_scale = 1.0);

/// Iterative Closest Algebraic Plane: alternate closest-plane matching and
/// the closed-form solve until the transform stops moving. Expects
/// size(src) <= size(dst); align_clouds handles the swap.
AlignmentResult icap(const PlaneCloud& src, const PlaneCloud& dst,
                     const Pose& T0, const IcapParams& params = {});

/// icap with the size convention handled: result always maps src into dst.
AlignmentResult align_clouds(const PlaneCloud& src, const PlaneCloud& dst,
                             const Pose& T0, const IcapParams& params = {});

struct InformationParams {
  double kappa = 1.0;
  double epsilon0 = 1e-6;
};

/// Isotropic 6x6 information weight kappa / (residual + epsilon0) * I.
/// Requires a converged result with at least 3 matches.
Mat6 alignment_information(const AlignmentResult& result,
                           const InformationParams& params = {});

}  // namespace pslam
