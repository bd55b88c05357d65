#include "pslam/geometry.hpp"

#include <cmath>

namespace pslam {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return Pose(a.quat() * b.quat(), a.quat() * b.translation() + a.translation());
}

Pose pose_inverse(const Pose& a) {
  Eigen::Quaterniond qi = a.quat().conjugate();
  return Pose(qi, qi * (-a.translation()));
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  double theta = phi.norm();
  Mat3 W = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * W + W * W / 6.0;
  }
  double t2 = theta * theta;
  double a = (1.0 - std::cos(theta)) / t2;
  double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * W + b * W * W;
}

Mat3 so3_left_jacobian_inv(const Vec3& phi) {
  double theta = phi.norm();
  Mat3 W = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * W + W * W / 12.0;
  }
  double c = 1.0 / (theta * theta) -
             (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() - 0.5 * W + c * W * W;
}

Vec6 se3_log(const Pose& a) {
  const Eigen::Quaterniond& q = a.quat();
  double vn = q.vec().norm();
  double w = q.w();  // >= 0 by canonicalization
  double theta = 2.0 * std::atan2(vn, w);
  Vec3 phi = Vec3::Zero();
  if (vn > 0.0) phi = (theta / vn) * q.vec();
  Vec6 out;
  out.tail<3>() = phi;
  out.head<3>() = so3_left_jacobian_inv(phi) * a.translation();
  return out;
}

Pose se3_exp(const Vec6& v) {
  Vec3 rho = v.head<3>();
  Vec3 phi = v.tail<3>();
  double theta = phi.norm();
  Eigen::Quaterniond q;
  if (theta < kSmallAngle) {
    q = Eigen::Quaterniond(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z());
    q.normalize();
  } else {
    q = Eigen::Quaterniond(Eigen::AngleAxisd(theta, phi / theta));
  }
  return Pose(q, so3_left_jacobian(phi) * rho);
}

// Barfoot's closed form for the coupling block of the SE(3) left Jacobian.
static Mat3 se3_jacobian_q(const Vec3& rho, const Vec3& phi) {
  double theta = phi.norm();
  Mat3 rx = skew(rho);
  Mat3 px = skew(phi);
  double c1, c2, c3;
  if (theta < 1e-4) {
    double t2 = theta * theta;
    c1 = 1.0 / 6.0 - t2 / 120.0;
    c2 = 1.0 / 24.0 - t2 / 720.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0;
  } else {
    double t2 = theta * theta;
    double t4 = t2 * t2;
    double st = std::sin(theta);
    double ct = std::cos(theta);
    c1 = (theta - st) / (t2 * theta);
    c2 = (1.0 - 0.5 * t2 - ct) / t4;
    c3 = -(theta - st - t2 * theta / 6.0) / (t4 * theta);
  }
  Mat3 q = 0.5 * rx;
  q += c1 * (px * rx + rx * px + px * rx * px);
  q -= c2 * (px * px * rx + rx * px * px - 3.0 * px * rx * px);
  q -= 0.5 * (c2 + 3.0 * c3) * (px * rx * px * px + px * px * rx * px);
  return q;
}

Mat6 se3_left_jacobian_inv(const Vec6& v) {
  Vec3 rho = v.head<3>();
  Vec3 phi = v.tail<3>();
  Mat3 ji = so3_left_jacobian_inv(phi);
  Mat3 q = se3_jacobian_q(rho, phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = ji;
  out.bottomRightCorner<3, 3>() = ji;
  out.topRightCorner<3, 3>() = -ji * q * ji;
  return out;
}

Mat6 se3_adjoint(const Pose& T) {
  Mat6 ad = Mat6::Zero();
  const Mat3& R = T.rotation();
  ad.topLeftCorner<3, 3>() = R;
  ad.bottomRightCorner<3, 3>() = R;
  ad.topRightCorner<3, 3>() = skew(T.translation()) * R;
  return ad;
}

Vec3 backproject(const CameraIntrinsics& intr, const Eigen::Vector2d& px,
                 double Z) {
  if (!(Z > 0.0))
    throw std::invalid_argument("backproject: missing depth measurement");
  return Vec3(Z * intr.tan_x(px.x()), Z * intr.tan_y(px.y()), Z);
}

Eigen::Vector2d project(const CameraIntrinsics& intr, const Vec3& p) {
  if (!(p.z() > 0.0))
    throw std::invalid_argument("project: point behind camera");
  return Eigen::Vector2d(intr.fx * p.x() / p.z() + intr.cx - intr.dx,
                         intr.fy * p.y() / p.z() + intr.cy - intr.dy);
}

Plane transform_plane(const Pose& T, const Plane& p) {
  // pi' = (T^-1)^t pi: n' = R n, d' = d - t . (R n).
  Vec3 n = T.rotation() * p.n;
  double d = p.d - T.translation().dot(n);
  return Plane(n, d);
}

}  // namespace pslam
