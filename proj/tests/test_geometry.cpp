#include "pslam/geometry.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace pslam;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("backproject principal-point ray") {
  CameraIntrinsics intr = oracle::test_intrinsics();
  Vec3 p = backproject(intr, {intr.cx - intr.dx, intr.cy - intr.dy}, 2.0);
  CHECK(p.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p.z() == doctest::Approx(2.0));
}

TEST_CASE("backproject 45-degree ray") {
  CameraIntrinsics intr = oracle::test_intrinsics();
  Vec3 p = backproject(
      intr, {intr.cx - intr.dx + intr.fx, intr.cy - intr.dy}, 1.0);
  CHECK(p.x() == doctest::Approx(1.0));
  CHECK(p.y() == doctest::Approx(0.0));
  CHECK(p.z() == doctest::Approx(1.0));
}

TEST_CASE("backproject rejects missing depth") {
  CameraIntrinsics intr = oracle::test_intrinsics();
  CHECK_THROWS_AS(backproject(intr, {10.0, 10.0}, 0.0), std::invalid_argument);
}

TEST_CASE("project/backproject roundtrip") {
  CameraIntrinsics intr = oracle::test_intrinsics();
  oracle::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Eigen::Vector2d px(rng.uniform(0, intr.width - 1),
                       rng.uniform(0, intr.height - 1));
    double z = rng.uniform(0.3, 8.0);
    Eigen::Vector2d back = project(intr, backproject(intr, px, z));
    CHECK((back - px).norm() < 1e-6);
  }
}

TEST_CASE("plane canonical form") {
  Plane p(Vec3(0, 0, 2), -4.0);  // z = 2 scaled by 2
  CHECK(p.n.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.d == doctest::Approx(2.0));
  CHECK(p.n.z() == doctest::Approx(-1.0));

  SUBCASE("idempotent") {
    Plane q(p.n, p.d);
    CHECK((q.coeffs() - p.coeffs()).norm() == 0.0);
  }
  SUBCASE("d == 0 picks positive leading component") {
    Plane through_origin(Vec3(0, -1, 0), 0.0);
    CHECK(through_origin.n.y() == doctest::Approx(1.0));
  }
}

TEST_CASE("transform_plane identity and translation") {
  Plane p = Plane::from_coeffs(Vec4(0, 0, 1, -2));  // plane z = 2
  CHECK((transform_plane(Pose::identity(), p).coeffs() - p.coeffs()).norm() ==
        0.0);

  Pose lift(Mat3::Identity(), Vec3(0, 0, 1));
  Plane moved = transform_plane(lift, p);
  // z = 3 after the shift; canonical form flips the normal sign.
  CHECK(moved.distance(Vec3(0.3, -0.2, 3.0)) < 1e-12);
  CHECK(moved.d == doctest::Approx(3.0));
}

TEST_CASE("transform_plane point-sampling oracle") {
  oracle::Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Pose T = oracle::random_pose(rng, 2.5, 2.0);
    Plane p(rng.unit_vec(), rng.uniform(0.0, 3.0));
    Plane q = transform_plane(T, p);
    // Basis of the source plane.
    Vec3 anchor = -p.d * p.n;
    Vec3 u = p.n.unitOrthogonal();
    Vec3 v = p.n.cross(u);
    for (int i = 0; i < 100; ++i) {
      Vec3 on_plane =
          anchor + rng.uniform(-5, 5) * u + rng.uniform(-5, 5) * v;
      CHECK(q.distance(T.apply(on_plane)) < 1e-9);
    }
  }
}

TEST_CASE("transform_plane composes") {
  oracle::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Pose T1 = oracle::random_pose(rng, 2.0, 1.5);
    Pose T2 = oracle::random_pose(rng, 2.0, 1.5);
    Plane p(rng.unit_vec(), rng.uniform(0.0, 3.0));
    Plane split = transform_plane(T2, transform_plane(T1, p));
    Plane joint = transform_plane(pose_compose(T2, T1), p);
    CHECK((split.coeffs() - joint.coeffs()).norm() < 1e-9);
  }
}

TEST_CASE("pose group axioms") {
  oracle::Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    Pose a = oracle::random_pose(rng, 3.0, 2.0);
    Pose ainv = pose_inverse(a);
    Pose id = pose_compose(a, ainv);
    CHECK((id.matrix() - Mat4::Identity()).norm() < 1e-12);

    Pose b = oracle::random_pose(rng, 3.0, 2.0);
    Pose c = oracle::random_pose(rng, 3.0, 2.0);
    Mat4 assoc1 = pose_compose(pose_compose(a, b), c).matrix();
    Mat4 assoc2 = pose_compose(a, pose_compose(b, c)).matrix();
    CHECK((assoc1 - assoc2).norm() < 1e-12);
  }
}

TEST_CASE("se3 log of identity is zero") {
  CHECK(se3_log(Pose::identity()).norm() == 0.0);
}

TEST_CASE("se3 exp/log roundtrip") {
  oracle::Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    Vec6 v;
    Vec3 axis = rng.unit_vec();
    double angle = rng.uniform(0.0, 3.0);
    v.tail<3>() = angle * axis;
    v.head<3>() = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2),
                       rng.uniform(-2, 2));
    Vec6 back = se3_log(se3_exp(v));
    CHECK((back - v).norm() < 1e-9);
  }
}

TEST_CASE("se3 log near and at pi") {
  Vec3 axis = Vec3(1.0, 2.0, -0.5).normalized();
  Pose almost = se3_exp((Vec6() << 0, 0, 0, (M_PI - 1e-7) * axis).finished());
  CHECK(se3_log(almost).tail<3>().norm() ==
        doctest::Approx(M_PI - 1e-7).epsilon(1e-9));

  // Angle exactly pi (quaternion w = 0): the canonical branch returns the
  // axis flavor whose first nonzero component is positive.
  Pose half_turn(Eigen::Quaterniond(0.0, -axis.x(), -axis.y(), -axis.z()),
                 Vec3::Zero());
  Vec3 phi = se3_log(half_turn).tail<3>();
  CHECK(phi.norm() == doctest::Approx(M_PI));
  CHECK(phi.x() > 0.0);
}

TEST_CASE("se3 left jacobian inverse matches finite differences") {
  oracle::Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Vec6 r;
    r.tail<3>() = rng.uniform(0.1, 2.5) * rng.unit_vec();
    r.head<3>() =
        Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Mat6 analytic = se3_left_jacobian_inv(r);
    // d/d eps log(exp(eps e_j) exp(r)) at eps = 0, column by column.
    Pose base = se3_exp(r);
    const double h = 1e-6;
    for (int j = 0; j < 6; ++j) {
      Vec6 e = Vec6::Zero();
      e[j] = h;
      Vec6 plus = se3_log(pose_compose(se3_exp(e), base));
      Vec6 minus = se3_log(pose_compose(se3_exp(-e), base));
      Vec6 col = (plus - minus) / (2.0 * h);
      CHECK((col - analytic.col(j)).norm() < 1e-5 * (1.0 + col.norm()));
    }
  }
}

TEST_CASE("depth image from a known plane backprojects onto it") {
  CameraIntrinsics intr = oracle::test_intrinsics();
  Plane plane(Vec3(0.2, -0.1, 1.0), -2.5);
  DepthImage img(intr.width, intr.height);
  oracle::render_plane_tile(img, intr, {0, 0, intr.width, intr.height}, plane);
  int checked = 0;
  for (int y = 0; y < intr.height; y += 7) {
    for (int x = 0; x < intr.width; x += 7) {
      if (!img.valid_at(x, y)) continue;
      Vec3 p = backproject(intr, {double(x), double(y)}, img.at(x, y));
      CHECK(plane.distance(p) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_SUITE_END();
