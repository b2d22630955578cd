#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "boxpose/geometry.hpp"
#include "boxpose/rng.hpp"

using namespace boxpose;

namespace {

const CameraIntrinsics kK{500.0, 500.0, 320.0, 240.0, 640, 480};

Pose random_pose(Rng& rng, double max_angle = 3.0) {
  const Eigen::Vector3d axis =
      Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
          .normalized();
  const double angle = rng.uniform(0.0, max_angle);
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis)),
              Eigen::Vector3d(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                              rng.uniform(0.8, 2.0)));
}

}  // namespace

TEST_CASE("project_point matches the pinhole formula") {
  CHECK(project_point({0, 0, 1}, kK).isApprox(Eigen::Vector2d(320, 240), 1e-12));
  CHECK(project_point({0.1, 0, 1}, kK).isApprox(Eigen::Vector2d(370, 240), 1e-12));
  CHECK(project_point({0.1, 0, 2}, kK).isApprox(Eigen::Vector2d(345, 240), 1e-12));
}

TEST_CASE("project_point rejects non-positive depth") {
  CHECK_THROWS_AS(project_point({0, 0, 0}, kK), ProjectionError);
  CHECK_THROWS_AS(project_point({0, 0, -1}, kK), ProjectionError);
}

TEST_CASE("project_point is scale covariant") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d p(rng.uniform(-1, 1), rng.uniform(-1, 1),
                            rng.uniform(0.1, 5.0));
    const double s = rng.uniform(0.1, 10.0);
    CHECK((project_point(p, kK) - project_point(s * p, kK)).norm() < 1e-9);
  }
}

TEST_CASE("cuboid keypoints: unit cube at identity") {
  CuboidModel cube{"cube", {1, 1, 1}};
  const auto pts = cuboid_keypoints(cube, Pose{});
  for (int i = 0; i < 8; ++i) {
    CHECK(std::abs(pts[i].x()) == Catch::Approx(0.5));
    CHECK(std::abs(pts[i].y()) == Catch::Approx(0.5));
    CHECK(std::abs(pts[i].z()) == Catch::Approx(0.5));
  }
  CHECK(pts[8].norm() == Catch::Approx(0.0).margin(1e-15));

  // documented corner order: x fastest, then y, then z, minus first
  CHECK(pts[0].isApprox(Eigen::Vector3d(-0.5, -0.5, -0.5)));
  CHECK(pts[1].isApprox(Eigen::Vector3d(0.5, -0.5, -0.5)));
  CHECK(pts[2].isApprox(Eigen::Vector3d(-0.5, 0.5, -0.5)));
  CHECK(pts[7].isApprox(Eigen::Vector3d(0.5, 0.5, 0.5)));
}

TEST_CASE("cuboid keypoints: pure translation") {
  CuboidModel cube{"cube", {1, 1, 1}};
  const Pose t(Eigen::Quaterniond::Identity(), {0, 0, 2});
  const auto pts = cuboid_keypoints(cube, t);
  for (int i = 0; i < 8; ++i) {
    CHECK(std::abs(pts[i].z() - 2.0) == Catch::Approx(0.5));
  }
  CHECK(pts[8].isApprox(Eigen::Vector3d(0, 0, 2)));
}

TEST_CASE("cuboid keypoints: 90 degree z rotation permutes corners within the set") {
  CuboidModel cube{"cube", {1, 1, 1}};
  const Pose r(Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ())),
               Eigen::Vector3d::Zero());
  const auto base = cuboid_keypoints(cube, Pose{});
  const auto rot = cuboid_keypoints(cube, r);

  auto key = [](const Eigen::Vector3d& p) {
    return std::make_tuple(std::lround(p.x() * 2), std::lround(p.y() * 2),
                           std::lround(p.z() * 2));
  };
  std::set<std::tuple<long, long, long>> a, b;
  for (int i = 0; i < 8; ++i) {
    a.insert(key(base[i]));
    b.insert(key(rot[i]));
  }
  CHECK(a == b);                                  // same corner set
  CHECK_FALSE(base[1].isApprox(rot[1], 1e-12));   // but the order permuted
}

TEST_CASE("project_keypoints centroid and symmetry") {
  CuboidModel cube{"cube", {1, 1, 1}};
  const Pose t(Eigen::Quaterniond::Identity(), {0, 0, 4});
  const auto px = project_keypoints(cube, t, kK);
  CHECK(px[8].isApprox(Eigen::Vector2d(320, 240), 1e-12));
  // front-face corners (z = +0.5 -> indices 4..7) sit symmetric about center
  for (int i = 4; i < 8; ++i) {
    const int opposite = 11 - i;
    CHECK((px[i] + px[opposite]).isApprox(Eigen::Vector2d(640, 480), 1e-9));
  }
}

TEST_CASE("project_keypoints reports the offending corner behind camera") {
  CuboidModel cube{"cube", {1, 1, 1}};
  const Pose t(Eigen::Quaterniond::Identity(), {0, 0, 0.3});
  try {
    project_keypoints(cube, t, kK);
    FAIL("expected ProjectionError");
  } catch (const ProjectionError& e) {
    CHECK(e.keypoint_index >= 0);
    CHECK(e.keypoint_index < 8);
  }
}

TEST_CASE("pose invariants: unit quaternion and inverse composition") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Pose p = random_pose(rng);
    CHECK(std::abs(p.rotation.norm() - 1.0) < 1e-9);
    const Pose id = p.compose(p.inverse());
    CHECK(std::abs(id.rotation.w()) > 1.0 - 1e-9);
    CHECK(id.translation.norm() < 1e-9);
  }
}

TEST_CASE("pose composition matches matrix composition") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Eigen::Vector3d p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Eigen::Vector3d via_compose = a.compose(b).apply(p);
    const Eigen::Vector3d via_chain = a.apply(b.apply(p));
    CHECK((via_compose - via_chain).norm() < 1e-12);
  }
}

TEST_CASE("intrinsics validation") {
  CHECK_NOTHROW(validate(kK));
  CameraIntrinsics bad = kK;
  bad.fx = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = kK;
  bad.cx = 700.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}
