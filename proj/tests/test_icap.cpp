#include "pslam/icap.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace pslam;

namespace {

std::vector<std::pair<Plane, Plane>> make_pairs(const PlaneCloud& src,
                                                const PlaneCloud& dst) {
  std::vector<std::pair<Plane, Plane>> out;
  for (std::size_t i = 0; i < src.fits.size(); ++i)
    out.emplace_back(src.fits[i].plane, dst.fits[i].plane);
  return out;
}

double rot_error(const Pose& a, const Pose& b) {
  return (a.rotation() - b.rotation()).norm();
}

/// Dense numeric minimization of the coefficient alignment objective over
/// SE(3), with per-pair sign resolution. Independent of the closed form.
Pose dense_alignment_search(const std::vector<std::pair<Plane, Plane>>& pairs,
                            const Pose& T_init) {
  auto residual = [&](const Eigen::VectorXd& v) {
    Pose T = pose_compose(se3_exp(Vec6(v)), T_init);
    Eigen::VectorXd r(4 * pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      Vec4 moved = transform_plane(T, pairs[i].first).coeffs();
      Vec4 want = pairs[i].second.coeffs();
      Vec4 diff = (want - moved).norm() <= (want + moved).norm()
                      ? Vec4(want - moved)
                      : Vec4(want + moved);
      r.segment<4>(4 * i) = diff;
    }
    return r;
  };
  Eigen::VectorXd v0 = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd v = oracle::dense_lm(residual, v0, 400, 1e-16);
  return pose_compose(se3_exp(Vec6(v)), T_init);
}

}  // namespace

TEST_SUITE_BEGIN("icap");

TEST_CASE("align_plane_pairs: cloud with itself gives identity") {
  oracle::Rng rng(71);
  PlaneCloud c = oracle::random_spanning_cloud(rng, 8);
  Pose T = align_plane_pairs(make_pairs(c, c));
  CHECK(rot_error(T, Pose::identity()) < 1e-12);
  CHECK(T.translation().norm() < 1e-12);
}

TEST_CASE("align_plane_pairs: three orthogonal planes, exact recovery") {
  PlaneCloud src;
  for (const auto& [n, d] : {std::pair{Vec3(1, 0, 0), -1.0},
                             std::pair{Vec3(0, 1, 0), -2.0},
                             std::pair{Vec3(0, 0, 1), -3.0}}) {
    PlaneFit f;
    f.plane = Plane(n, d);
    src.fits.push_back(f);
  }
  oracle::Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    Pose T = oracle::random_pose(rng, 0.5, 1.0);
    PlaneCloud dst = oracle::transform_cloud(src, T);
    Pose got = align_plane_pairs(make_pairs(src, dst));
    CHECK(rot_error(got, T) < 1e-9);
    CHECK((got.translation() - T.translation()).norm() < 1e-9);
  }
}

TEST_CASE("align_plane_pairs: exact recovery with canonical sign flips") {
  oracle::Rng rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    PlaneCloud src = oracle::random_spanning_cloud(
        rng, 3 + int(rng.uniform(0, 10)), 0.1, 2.0);
    // Translations up to 1 m regularly flip the canonical sign of planes
    // with small offsets.
    Pose T = oracle::random_pose(rng, 0.5, 1.0);
    PlaneCloud dst = oracle::transform_cloud(src, T);
    Pose got = align_plane_pairs(make_pairs(src, dst));
    CHECK(rot_error(got, T) < 1e-9);
    CHECK((got.translation() - T.translation()).norm() < 1e-9);
  }
}

TEST_CASE("align_plane_pairs: error taxonomy") {
  oracle::Rng rng(83);
  PlaneCloud c = oracle::random_spanning_cloud(rng, 8);

  SUBCASE("fewer than three matches") {
    std::vector<std::pair<Plane, Plane>> two = {
        {c.fits[0].plane, c.fits[0].plane}, {c.fits[1].plane, c.fits[1].plane}};
    CHECK_THROWS_AS(align_plane_pairs(two), AlignmentError);
  }
  SUBCASE("parallel normals are degenerate") {
    std::vector<std::pair<Plane, Plane>> par;
    for (double d : {1.0, 2.0, 3.0, 4.0})
      par.emplace_back(Plane(Vec3(0, 0, 1), -d), Plane(Vec3(0, 0, 1), -d));
    try {
      align_plane_pairs(par);
      FAIL("expected AlignmentError");
    } catch (const AlignmentError& e) {
      CHECK(e.kind() == AlignErrorKind::degenerate_geometry);
    }
  }
}

TEST_CASE("align_plane_pairs: right-handed even for mirrored normals") {
  // Destination normals form a reflection of the source triad; the plain
  // SVD solution would be a reflection, the fix must keep det = +1.
  std::vector<std::pair<Plane, Plane>> pairs = {
      {Plane(Vec3(1, 0, 0), 1.0), Plane(Vec3(1, 0, 0), 1.0)},
      {Plane(Vec3(0, 1, 0), 2.0), Plane(Vec3(0, 1, 0), 2.0)},
      {Plane(Vec3(0, 0, 1), 3.0), Plane(Vec3(0, 0, -1), 3.0)},
      {Plane(Vec3(1, 1, 1).normalized(), 1.5),
       Plane(Vec3(1, 1, -1).normalized(), 1.5)},
  };
  Pose T = align_plane_pairs(pairs);
  CHECK(T.rotation().determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("align_plane_pairs: noisy solve tracks the dense search oracle") {
  oracle::Rng rng(89);
  for (int trial = 0; trial < 10; ++trial) {
    PlaneCloud src = oracle::random_spanning_cloud(rng, 10);
    Pose T = oracle::random_pose(rng, 0.4, 0.8);
    PlaneCloud dst =
        oracle::perturb_cloud(oracle::transform_cloud(src, T), rng, 1e-3);
    auto pairs = make_pairs(src, dst);
    Pose closed = align_plane_pairs(pairs, T.rotation());
    Pose searched = dense_alignment_search(pairs, T);
    double angle =
        Eigen::AngleAxisd(closed.rotation().transpose() * searched.rotation())
            .angle();
    CHECK(angle < 0.2 * M_PI / 180.0);
    CHECK((closed.translation() - searched.translation()).norm() < 5e-3);
  }
}

TEST_CASE("closest_plane") {
  PlaneCloud cloud;
  for (double d : {1.0, 5.0}) {
    PlaneFit f;
    f.plane = Plane(Vec3(0, 0, 1), -d);
    cloud.fits.push_back(f);
  }

  SUBCASE("exact member, identity transform") {
    auto [idx, dist] =
        closest_plane(cloud.fits[0].plane, cloud, Pose::identity());
    CHECK(idx == 0);
    CHECK(dist == 0.0);
  }
  SUBCASE("nearest by offset") {
    Plane probe(Vec3(0, 0, 1), -1.4);
    auto [idx, dist] = closest_plane(probe, cloud, Pose::identity());
    CHECK(idx == 0);
    CHECK(dist == doctest::Approx(0.16));
  }
  SUBCASE("matches an exhaustive scan with lowest-index ties") {
    oracle::Rng rng(97);
    PlaneCloud big = oracle::random_spanning_cloud(rng, 20);
    Pose T = oracle::random_pose(rng, 0.3, 0.5);
    for (int t = 0; t < 50; ++t) {
      Plane probe(rng.unit_vec(), rng.uniform(0, 3));
      auto [idx, dist] = closest_plane(probe, big, T);
      Plane moved = transform_plane(T, probe);
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < int(big.fits.size()); ++j) {
        double d2 =
            (moved.coeffs() - big.fits[j].plane.coeffs()).squaredNorm();
        if (d2 < best_d) {
          best_d = d2;
          best = j;
        }
      }
      CHECK(idx == best);
      CHECK(dist == doctest::Approx(best_d));
    }
  }
  SUBCASE("argmin invariant to pre-canonicalization scaling") {
    oracle::Rng rng(101);
    PlaneCloud big = oracle::random_spanning_cloud(rng, 15);
    PlaneCloud scaled = big;
    for (PlaneFit& f : scaled.fits)
      f.plane = Plane::from_coeffs(3.7 * f.plane.coeffs());
    Plane probe(rng.unit_vec(), rng.uniform(0, 3));
    CHECK(closest_plane(probe, big, Pose::identity()).first ==
          closest_plane(probe, scaled, Pose::identity()).first);
  }
}

TEST_CASE("icap: cloud against itself converges immediately") {
  oracle::Rng rng(103);
  PlaneCloud c = oracle::random_spanning_cloud(rng, 10);
  AlignmentResult res = icap(c, c, Pose::identity());
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.residual < 1e-20);
  CHECK(rot_error(res.T, Pose::identity()) < 1e-12);
}

TEST_CASE("icap: recovers a hallway-scale offset from identity") {
  oracle::Rng rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    PlaneCloud src = oracle::random_spanning_cloud(rng, 14, 0.5, 4.0);
    Vec3 axis = rng.unit_vec();
    Pose T(Eigen::Quaterniond(Eigen::AngleAxisd(10.0 * M_PI / 180.0, axis)),
           0.3 * rng.unit_vec());
    PlaneCloud dst = oracle::transform_cloud(src, T);
    IcapParams params;
    params.match_gate = 1.0;  // identity start across a 0.3 m / 10 deg gap
    AlignmentResult res = icap(src, dst, Pose::identity(), params);
    CHECK(res.converged);
    CHECK(Eigen::AngleAxisd(res.T.rotation().transpose() * T.rotation())
              .angle() < 1.0 * M_PI / 180.0);
    CHECK((res.T.translation() - T.translation()).norm() < 0.02);
  }
}

TEST_CASE("icap: parallel-plane clouds are degenerate") {
  PlaneCloud a, b;
  for (double d : {1.0, 2.0, 3.0, 4.0, 5.0}) {
    PlaneFit f;
    f.plane = Plane(Vec3(0, 0, 1), -d);
    a.fits.push_back(f);
    b.fits.push_back(f);
  }
  CHECK_THROWS_AS(icap(a, b, Pose::identity()), AlignmentError);
}

TEST_CASE("icap: solve step never increases the matched residual") {
  oracle::Rng rng(109);
  for (int trial = 0; trial < 40; ++trial) {
    PlaneCloud src = oracle::random_spanning_cloud(rng, 12);
    Pose T_true = oracle::random_pose(rng, 0.3, 0.4);
    PlaneCloud dst =
        oracle::perturb_cloud(oracle::transform_cloud(src, T_true), rng, 1e-3);
    // A transform inside the basin but off the optimum.
    Pose T_i = pose_compose(se3_exp(0.05 * Vec6::Random()), T_true);

    std::vector<std::pair<Plane, Plane>> pairs;
    double before = 0.0;
    for (const PlaneFit& f : src.fits) {
      auto [j, dist] = closest_plane(f.plane, dst, T_i);
      pairs.emplace_back(f.plane, dst.fits[j].plane);
      before += dist;
    }
    Pose T_next = align_plane_pairs(pairs, T_i.rotation());
    double after = 0.0;
    for (const auto& [s, d] : pairs) {
      Plane moved = transform_plane(T_next, s);
      after += std::min((moved.coeffs() - d.coeffs()).squaredNorm(),
                        (moved.coeffs() + d.coeffs()).squaredNorm());
    }
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("icap: symmetry between the two directions") {
  oracle::Rng rng(113);
  for (int trial = 0; trial < 10; ++trial) {
    PlaneCloud a = oracle::random_spanning_cloud(rng, 12);
    Pose T = oracle::random_pose(rng, 0.25, 0.3);
    PlaneCloud b = oracle::transform_cloud(a, T);
    Pose T0 = pose_compose(se3_exp(0.02 * Vec6::Random()), T);
    AlignmentResult fwd = icap(a, b, T0);
    AlignmentResult bwd = icap(b, a, pose_inverse(T0));
    REQUIRE(fwd.converged);
    REQUIRE(bwd.converged);
    Mat4 prod = fwd.T.matrix() * bwd.T.matrix();
    CHECK((prod - Mat4::Identity()).norm() < 1e-6);
  }
}

TEST_CASE("align_clouds swaps so the smaller cloud drives matching") {
  oracle::Rng rng(127);
  PlaneCloud small = oracle::random_spanning_cloud(rng, 6);
  PlaneCloud big = small;
  // Pad the destination with far-away distractor planes.
  for (int i = 0; i < 6; ++i) {
    PlaneFit f;
    f.plane = Plane(rng.unit_vec(), rng.uniform(8.0, 12.0));
    big.fits.push_back(f);
  }
  Pose T = oracle::random_pose(rng, 0.2, 0.2);
  PlaneCloud big_moved = oracle::transform_cloud(big, T);
  AlignmentResult res = align_clouds(big_moved, small, pose_inverse(T));
  REQUIRE(res.converged);
  CHECK(rot_error(res.T, pose_inverse(T)) < 1e-6);
  for (const PlaneMatch& m : res.matches) {
    CHECK(m.idx_src < int(big_moved.fits.size()));
    CHECK(m.idx_dst < int(small.fits.size()));
  }
}

TEST_CASE("alignment_information") {
  AlignmentResult res;
  res.converged = true;
  res.matches.resize(5);

  res.residual = 0.0;
  CHECK(alignment_information(res)(0, 0) == doctest::Approx(1e6));

  res.residual = 1e-6;
  CHECK(alignment_information(res)(0, 0) == doctest::Approx(0.5e6));

  SUBCASE("doubling the residual roughly halves the weight") {
    res.residual = 0.1;
    double w1 = alignment_information(res)(3, 3);
    res.residual = 0.2;
    double w2 = alignment_information(res)(3, 3);
    CHECK(w1 / w2 == doctest::Approx(2.0).epsilon(1e-4));
  }
  SUBCASE("identity scaling") {
    res.residual = 0.01;
    Mat6 info = alignment_information(res);
    CHECK((info - info(0, 0) * Mat6::Identity()).norm() == 0.0);
  }
  SUBCASE("non-converged rejected") {
    res.converged = false;
    CHECK_THROWS_AS(alignment_information(res), std::invalid_argument);
  }
}

TEST_SUITE_END();
