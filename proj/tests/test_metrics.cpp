#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "boxpose/metrics.hpp"
#include "boxpose/rng.hpp"

using namespace boxpose;

namespace {

Pose random_pose(Rng& rng) {
  const Eigen::Vector3d axis =
      Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
          .normalized();
  return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(rng.uniform(0, M_PI), axis)),
              Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                              rng.uniform(-1, 1)));
}

ModelPointCloud random_cloud(Rng& rng, int n) {
  ModelPointCloud pts;
  for (int i = 0; i < n; ++i)
    pts.emplace_back(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                     rng.uniform(-0.2, 0.2));
  return pts;
}

}  // namespace

TEST_CASE("add metric basics") {
  Rng rng(7);
  const ModelPointCloud pts = random_cloud(rng, 100);
  const Pose gt = random_pose(rng);

  CHECK(add_metric(gt, gt, pts) == 0.0);

  Pose shifted = gt;
  shifted.translation += Eigen::Vector3d(0.02, 0, 0);
  CHECK(add_metric(gt, shifted, pts) == Catch::Approx(0.02).epsilon(1e-12));

  CHECK_THROWS_AS(add_metric(gt, gt, ModelPointCloud{}), std::invalid_argument);
}

TEST_CASE("add under extra rotation matches the per-point oracle") {
  Rng rng(11);
  const ModelPointCloud pts = random_cloud(rng, 200);
  const Pose gt = random_pose(rng);
  const Eigen::Quaterniond extra(
      Eigen::AngleAxisd(10.0 * M_PI / 180.0, Eigen::Vector3d::UnitY()));
  const Pose est(gt.rotation * extra, gt.translation);

  // direct per-point summation, written independently of add_metric
  double sum = 0.0;
  for (const auto& p : pts) {
    const Eigen::Vector3d a = gt.rotation * p + gt.translation;
    const Eigen::Vector3d b = est.rotation * p + est.translation;
    sum += std::sqrt((a.x() - b.x()) * (a.x() - b.x()) +
                     (a.y() - b.y()) * (a.y() - b.y()) +
                     (a.z() - b.z()) * (a.z() - b.z()));
  }
  const double oracle = sum / static_cast<double>(pts.size());
  CHECK(add_metric(gt, est, pts) == Catch::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("add is invariant under a common rigid transform and symmetric") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const ModelPointCloud pts = random_cloud(rng, 50);
    const Pose gt = random_pose(rng);
    const Pose est = random_pose(rng);
    const Pose t = random_pose(rng);
    const double base = add_metric(gt, est, pts);
    CHECK(std::abs(add_metric(t.compose(gt), t.compose(est), pts) - base) < 1e-12);
    CHECK(std::abs(add_metric(est, gt, pts) - base) < 1e-14);
  }
}

TEST_CASE("accuracy curve endpoints") {
  const std::vector<double> zeros(100, 0.0);
  const EvaluationCurve all_good = accuracy_curve(zeros, 0.10, 100);
  for (double a : all_good.accuracy) CHECK(a == 1.0);
  CHECK(all_good.auc == Catch::Approx(1.0));

  const std::vector<double> high(100, 0.5);
  const EvaluationCurve all_bad = accuracy_curve(high, 0.10, 100);
  for (double a : all_bad.accuracy) CHECK(a == 0.0);
  CHECK(all_bad.auc == 0.0);

  CHECK_THROWS_AS(accuracy_curve({}, 0.1, 100), std::invalid_argument);
  CHECK_THROWS_AS(accuracy_curve(zeros, 0.1, 1), std::invalid_argument);
}

TEST_CASE("uniform errors give auc one half") {
  Rng rng(17);
  std::vector<double> errors;
  errors.reserve(100000);
  for (int i = 0; i < 100000; ++i) errors.push_back(rng.uniform(0.0, 0.10));
  const EvaluationCurve c = accuracy_curve(errors, 0.10, 100);
  CHECK(c.auc == Catch::Approx(0.5).margin(0.01));  // analytic expectation
}

TEST_CASE("curves are non-decreasing and auc equals an independent trapezoid pass") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> errors;
    const int n = 50 + rng.uniform_int(200);
    for (int i = 0; i < n; ++i) errors.push_back(rng.uniform(0.0, 0.3));
    if (rng.canonical() < 0.3)
      errors.push_back(std::numeric_limits<double>::infinity());  // missed case
    const EvaluationCurve c = accuracy_curve(errors, 0.10, 77);

    double second_path = 0.0;  // re-derived trapezoid, separate code path
    for (std::size_t i = 1; i < c.accuracy.size(); ++i)
      second_path += (c.accuracy[i] + c.accuracy[i - 1]) / 2.0 *
                     (c.thresholds[i] - c.thresholds[i - 1]);
    second_path /= c.max_threshold;
    CHECK(c.auc == Catch::Approx(second_path).epsilon(1e-12));
    for (std::size_t i = 1; i < c.accuracy.size(); ++i)
      CHECK(c.accuracy[i] >= c.accuracy[i - 1]);
    CHECK(c.auc >= 0.0);
    CHECK(c.auc <= 1.0);
  }
}

TEST_CASE("accuracy_at examples") {
  CHECK(accuracy_at({0.01, 0.03}, 0.02) == 0.5);
  CHECK(accuracy_at({0.01, 0.03}, 0.0) == 0.0);
  CHECK(accuracy_at({0.0, 0.03}, 0.0) == 0.5);  // zero errors pass t = 0
}

TEST_CASE("l2 label loss") {
  BeliefMapSet maps(20, 30), maps2(20, 30);
  VectorFieldSet fields(20, 30), fields2(20, 30);
  Rng rng(23);
  for (auto& v : maps.grid.data) v = static_cast<float>(rng.canonical());
  for (auto& v : fields.grid.data) v = static_cast<float>(rng.uniform(-1, 1));
  maps2 = maps;
  fields2 = fields;

  CHECK(l2_label_loss(maps, fields, maps2, fields2) == 0.0);

  // +0.1 on one whole channel -> 0.01 * H * W
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 30; ++x) maps2.grid.at(4, y, x) += 0.1f;
  CHECK(l2_label_loss(maps, fields, maps2, fields2) ==
        Catch::Approx(0.01 * 20 * 30).epsilon(1e-4));

  // random pair against an independently coded accumulation
  for (auto& v : maps2.grid.data) v = static_cast<float>(rng.canonical());
  for (auto& v : fields2.grid.data) v = static_cast<float>(rng.uniform(-1, 1));
  long double acc = 0.0L;
  for (std::size_t i = 0; i < maps.grid.data.size(); ++i) {
    const long double d =
        static_cast<long double>(maps.grid.data[i]) - maps2.grid.data[i];
    acc += d * d;
  }
  for (std::size_t i = 0; i < fields.grid.data.size(); ++i) {
    const long double d =
        static_cast<long double>(fields.grid.data[i]) - fields2.grid.data[i];
    acc += d * d;
  }
  const double oracle = static_cast<double>(acc);
  CHECK(l2_label_loss(maps, fields, maps2, fields2) ==
        Catch::Approx(oracle).epsilon(1e-9));

  BeliefMapSet wrong(10, 30);
  CHECK_THROWS_AS(l2_label_loss(wrong, fields, maps2, fields2),
                  std::invalid_argument);
}

TEST_CASE("csv export format") {
  const EvaluationCurve c = accuracy_curve({0.01, 0.05, 0.2}, 0.10, 3);
  const std::string csv = curve_to_csv(c);
  CHECK(csv.rfind("threshold_m,accuracy\n", 0) == 0);
  CHECK(csv.find("# auc=") != std::string::npos);
  // one row per sample between header and trailer
  int rows = 0;
  for (char ch : csv) rows += ch == '\n' ? 1 : 0;
  CHECK(rows == 5);  // header + 3 samples + auc line
}

TEST_CASE("cuboid surface points are deterministic and on the surface") {
  const CuboidModel box{"box", {0.2, 0.3, 0.4}};
  const ModelPointCloud a = cuboid_surface_points(box, 500);
  const ModelPointCloud b = cuboid_surface_points(box, 500);
  REQUIRE(a.size() == 500);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  for (const auto& p : a) {
    const Eigen::Vector3d h = 0.5 * box.dims;
    const bool on_x = std::abs(std::abs(p.x()) - h.x()) < 1e-12 &&
                      std::abs(p.y()) <= h.y() && std::abs(p.z()) <= h.z();
    const bool on_y = std::abs(std::abs(p.y()) - h.y()) < 1e-12 &&
                      std::abs(p.x()) <= h.x() && std::abs(p.z()) <= h.z();
    const bool on_z = std::abs(std::abs(p.z()) - h.z()) < 1e-12 &&
                      std::abs(p.x()) <= h.x() && std::abs(p.y()) <= h.y();
    CHECK((on_x || on_y || on_z));
  }
}
