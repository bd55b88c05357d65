#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pslam {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Pinhole camera model. Pixel (x, y) maps to the viewing ray
/// direction (tan_x, tan_y, 1) with tan_x = (x + dx - cx) / fx.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double dx = 0.5;  // pixel-center offset
  double dy = 0.5;
  int width = 0;
  int height = 0;

  double tan_x(double px) const { return (px + dx - cx) / fx; }
  double tan_y(double py) const { return (py + dy - cy) / fy; }

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx > 0.0 &&
           cx < width && cy > 0.0 && cy < height;
  }
};

/// Depth raster in meters, row-major. Depth 0 marks a missing measurement.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> depths;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), depths(size_t(w) * h, 0.0f) {}

  float at(int x, int y) const { return depths[size_t(y) * width + x]; }
  float& at(int x, int y) { return depths[size_t(y) * width + x]; }
  bool valid_at(int x, int y) const { return at(x, y) > 0.0f; }
  const float* row(int y) const { return depths.data() + size_t(y) * width; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
};

/// Plane in Hessian normal form: n.x * X + n.y * Y + n.z * Z + d = 0 with
/// |n| = 1. Stored sign-canonicalized: d >= 0, and when d == 0 the first
/// nonzero normal component is positive.
struct Plane {
  Vec3 n = Vec3::UnitZ();
  double d = 0.0;

  Plane() = default;
  Plane(const Vec3& normal, double offset) { set(normal, offset); }

  /// Builds from raw (a, b, c, d), normalizing |abc| to 1 and fixing sign.
  static Plane from_coeffs(const Vec4& c) {
    return Plane(c.head<3>(), c[3]);
  }

  Vec4 coeffs() const { return Vec4(n.x(), n.y(), n.z(), d); }

  double signed_distance(const Vec3& p) const { return n.dot(p) + d; }
  double distance(const Vec3& p) const { return std::abs(signed_distance(p)); }

 private:
  void set(const Vec3& normal, double offset) {
    double len = normal.norm();
    if (!(len > 0.0)) throw std::invalid_argument("Plane: zero normal");
    Vec3 u = normal / len;
    double o = offset / len;
    if (o < 0.0) {
      u = -u;
      o = -o;
    } else if (o == 0.0) {
      for (int i = 0; i < 3; ++i) {
        if (u[i] != 0.0) {
          if (u[i] < 0.0) u = -u;
          break;
        }
      }
    }
    n = u;
    d = o;
  }
};

/// Pixel-aligned tile, fully inside the image it refers to.
struct TileRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  std::int64_t area() const { return std::int64_t(w) * h; }
  bool inside(int img_w, int img_h) const {
    return x >= 0 && y >= 0 && w >= 1 && h >= 1 && x + w <= img_w &&
           y + h <= img_h;
  }
  bool operator==(const TileRect&) const = default;
};

/// One accepted planar patch: fit coefficients plus the pixel tile it covers.
struct PlaneFit {
  Plane plane;
  TileRect tile;
  double rms_error = 0.0;  // orthogonal point-to-plane RMS, meters
  int point_count = 0;     // valid depths used by the fit
};

/// A keyframe's compressed content: the set of plane fits replacing the
/// dense point cloud.
struct PlaneCloud {
  std::uint64_t frame_id = 0;
  double timestamp = 0.0;
  std::vector<PlaneFit> fits;

  std::size_t size() const { return fits.size(); }
};

/// Rigid transform in SE(3). The unit quaternion is the authoritative
/// rotation representation (sign-canonicalized, w >= 0) so that poses
/// survive text serialization bit-exactly; the matrix is a cached view.
class Pose {
 public:
  Pose() : q_(1.0, 0.0, 0.0, 0.0), t_(Vec3::Zero()), R_(Mat3::Identity()) {}

  Pose(const Eigen::Quaterniond& q, const Vec3& t) : t_(t) {
    q_ = q.normalized();
    canonicalize_sign();
    R_ = q_.toRotationMatrix();
  }

  Pose(const Mat3& R, const Vec3& t) : Pose(Eigen::Quaterniond(R), t) {}

  static Pose identity() { return Pose(); }

  /// Wraps an already-normalized quaternion without renormalizing, so wire
  /// and file round-trips reproduce the stored doubles bit-exactly.
  static Pose from_normalized(const Eigen::Quaterniond& q, const Vec3& t) {
    Pose p;
    p.q_ = q;
    p.t_ = t;
    p.canonicalize_sign();
    p.R_ = p.q_.toRotationMatrix();
    return p;
  }

  const Mat3& rotation() const { return R_; }
  const Eigen::Quaterniond& quat() const { return q_; }
  const Vec3& translation() const { return t_; }

  Vec3 apply(const Vec3& p) const { return R_ * p + t_; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = R_;
    m.topRightCorner<3, 1>() = t_;
    return m;
  }

  /// Rotation angle in [0, pi].
  double rotation_angle() const {
    return 2.0 * std::atan2(q_.vec().norm(), std::abs(q_.w()));
  }

 private:
  void canonicalize_sign() {
    const double* c = q_.coeffs().data();  // x y z w
    double lead = c[3];
    if (lead == 0.0) {
      for (int i = 0; i < 3; ++i) {
        if (c[i] != 0.0) {
          lead = c[i];
          break;
        }
      }
    }
    if (lead < 0.0) q_.coeffs() = -q_.coeffs();
  }

  Eigen::Quaterniond q_;
  Vec3 t_;
  Mat3 R_;
};

Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& a);

/// SE(3) logarithm, 6-vector ordered (translation part, rotation part);
/// the rotation part is an axis-angle vector in radians.
Vec6 se3_log(const Pose& a);

/// SE(3) exponential; requires |rotation part| < pi (angle exactly pi is
/// handled by se3_log's canonical branch, not produced by exp inputs).
Pose se3_exp(const Vec6& v);

Mat3 skew(const Vec3& v);

/// SO(3) left Jacobian and its inverse.
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inv(const Vec3& phi);

/// SE(3) left Jacobian inverse for twist v = (rho, phi).
Mat6 se3_left_jacobian_inv(const Vec6& v);

/// Adjoint of T: exp(Ad_T v) = T exp(v) T^-1.
Mat6 se3_adjoint(const Pose& T);

/// Back-projects pixel px at depth Z (meters) into the camera frame.
/// Throws std::invalid_argument for Z <= 0 (missing measurement).
Vec3 backproject(const CameraIntrinsics& intr, const Eigen::Vector2d& px,
                 double Z);

/// Perspective projection of a camera-frame point; inverse of backproject.
Eigen::Vector2d project(const CameraIntrinsics& intr, const Vec3& p);

/// Maps a plane across a rigid transform: points q on p satisfy the
/// returned plane at T * q. Result is canonicalized.
Plane transform_plane(const Pose& T, const Plane& p);

}  // namespace pslam
