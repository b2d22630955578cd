#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "boxpose/geometry.hpp"
#include "boxpose/rng.hpp"
#include "boxpose/tensor.hpp"

namespace boxpose {

/// Object-frame 3D points the ADD metric averages over.
using ModelPointCloud = std::vector<Eigen::Vector3d>;

/// Deterministic fallback cloud: points sampled on the cuboid surface,
/// area-weighted over the six faces. Used when no mesh cloud is supplied.
inline ModelPointCloud cuboid_surface_points(const CuboidModel& m, int count = 500,
                                             std::uint64_t seed = 0x5EEDCAFE) {
  Rng rng(seed);
  const Eigen::Vector3d h = 0.5 * m.dims;
  const double ax = m.dims.y() * m.dims.z();  // x-normal face area
  const double ay = m.dims.x() * m.dims.z();
  const double az = m.dims.x() * m.dims.y();
  const double total = 2.0 * (ax + ay + az);
  ModelPointCloud pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    double r = rng.uniform(0.0, total);
    const double sign = (rng.canonical() < 0.5) ? -1.0 : 1.0;
    const double u = rng.canonical(), v = rng.canonical();
    if (r < 2.0 * ax) {
      pts.emplace_back(sign * h.x(), (2.0 * u - 1.0) * h.y(), (2.0 * v - 1.0) * h.z());
    } else if (r < 2.0 * (ax + ay)) {
      pts.emplace_back((2.0 * u - 1.0) * h.x(), sign * h.y(), (2.0 * v - 1.0) * h.z());
    } else {
      pts.emplace_back((2.0 * u - 1.0) * h.x(), (2.0 * v - 1.0) * h.y(), sign * h.z());
    }
  }
  return pts;
}

/// Average 3D Euclidean distance of all model points between the two poses.
inline double add_metric(const Pose& gt, const Pose& est, const ModelPointCloud& pts) {
  if (pts.empty()) throw std::invalid_argument("add_metric: empty point cloud");
  double acc = 0.0;
  for (const auto& p : pts) acc += (gt.apply(p) - est.apply(p)).norm();
  return acc / static_cast<double>(pts.size());
}

/// Accuracy as a function of error threshold plus its normalized area under
/// the curve. Missed detections enter as +inf errors and fail every threshold.
struct EvaluationCurve {
  std::vector<double> thresholds;  // ascending, meters
  std::vector<double> accuracy;    // fraction in [0, 1] per threshold
  double auc = 0.0;                // trapezoidal integral / max_threshold
  double max_threshold = 0.10;
};

inline double accuracy_at(const std::vector<double>& errors, double t) {
  if (errors.empty()) throw std::invalid_argument("accuracy_at: no errors");
  std::size_t hit = 0;
  for (double e : errors) hit += (e <= t) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(errors.size());
}

inline EvaluationCurve accuracy_curve(const std::vector<double>& errors,
                                      double max_threshold = 0.10,
                                      int num_samples = 100) {
  if (errors.empty()) throw std::invalid_argument("accuracy_curve: no errors");
  if (num_samples < 2) throw std::invalid_argument("accuracy_curve: need >= 2 samples");
  EvaluationCurve c;
  c.max_threshold = max_threshold;
  c.thresholds.resize(num_samples);
  c.accuracy.resize(num_samples);
  for (int i = 0; i < num_samples; ++i) {
    const double t = max_threshold * static_cast<double>(i) / (num_samples - 1);
    c.thresholds[i] = t;
    c.accuracy[i] = accuracy_at(errors, t);
  }
  double area = 0.0;
  for (int i = 1; i < num_samples; ++i)
    area += 0.5 * (c.accuracy[i] + c.accuracy[i - 1]) *
            (c.thresholds[i] - c.thresholds[i - 1]);
  c.auc = area / max_threshold;
  return c;
}

/// Sum of squared per-cell differences over both label tensors (25 channels).
inline double l2_label_loss(const BeliefMapSet& pred_maps,
                            const VectorFieldSet& pred_fields,
                            const BeliefMapSet& gt_maps,
                            const VectorFieldSet& gt_fields) {
  if (!pred_maps.grid.same_shape(gt_maps.grid) ||
      !pred_fields.grid.same_shape(gt_fields.grid))
    throw std::invalid_argument("l2_label_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred_maps.grid.size(); ++i) {
    const double d = static_cast<double>(pred_maps.grid.data[i]) - gt_maps.grid.data[i];
    acc += d * d;
  }
  for (std::size_t i = 0; i < pred_fields.grid.size(); ++i) {
    const double d = static_cast<double>(pred_fields.grid.data[i]) - gt_fields.grid.data[i];
    acc += d * d;
  }
  return acc;
}

/// CSV export: header row, one threshold/accuracy row per sample, trailing
/// comment line with the AUC.
inline std::string curve_to_csv(const EvaluationCurve& c) {
  std::string out = "threshold_m,accuracy\n";
  char buf[64];
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", c.thresholds[i], c.accuracy[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "# auc=%.6f\n", c.auc);
  out += buf;
  return out;
}

}  // namespace boxpose
