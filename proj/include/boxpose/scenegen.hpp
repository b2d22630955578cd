#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "boxpose/geometry.hpp"
#include "boxpose/labelgen.hpp"
#include "boxpose/rng.hpp"
#include "boxpose/tensor.hpp"

namespace boxpose {

/// Spherical camera sampling ranges about a fixation point. Angles in
/// degrees, distance in meters; each dimension is drawn uniformly.
struct CameraSamplerConfig {
  double azimuth_min_deg = -120.0;
  double azimuth_max_deg = 120.0;
  double elevation_min_deg = 5.0;
  double elevation_max_deg = 85.0;
  double distance_min = 0.5;
  double distance_max = 1.5;
  Eigen::Vector3d fixation{0.0, 0.0, 0.0};
};

inline void validate(const CameraSamplerConfig& c) {
  if (!(c.azimuth_min_deg <= c.azimuth_max_deg) ||
      !(c.elevation_min_deg <= c.elevation_max_deg) ||
      !(c.distance_min <= c.distance_max))
    throw std::invalid_argument("camera sampler: empty range");
  if (c.azimuth_min_deg < -180.0 || c.azimuth_max_deg > 180.0 ||
      c.elevation_min_deg < -90.0 || c.elevation_max_deg > 90.0 ||
      !(c.distance_min > 0.0))
    throw std::invalid_argument("camera sampler: range outside its domain");
}

/// Scene placement on top of the camera sampler: objects drop uniformly into
/// a cube of side world_box_extent centered on the fixation point.
struct SceneGenConfig {
  CameraSamplerConfig camera;
  double world_box_extent = 0.4;
  int placement_retries = 100;
};

/// One sampled frame: world camera pose, world object poses, and the derived
/// camera-frame pose per retained instance. Every retained instance has its
/// centroid in front of the camera and inside the image.
struct SceneSample {
  Pose camera_pose;  // camera-to-world
  CameraIntrinsics intrinsics;
  struct Instance {
    int object_index = 0;
    std::string object_name;
    Pose world_pose;   // object-to-world
    Pose camera_frame; // object-to-camera
  };
  std::vector<Instance> instances;
  int requested = 0;  // instances asked for; instances.size() may be fewer
};

namespace scenegen_detail {

constexpr double kPi = 3.14159265358979323846;

/// Uniform rotation via the three-uniform-number unit-quaternion
/// construction (u1, u2, u3 in [0,1)):
///   q = (sqrt(1-u1) sin 2pi u2, sqrt(1-u1) cos 2pi u2,
///        sqrt(u1) sin 2pi u3,   sqrt(u1) cos 2pi u3).
inline Eigen::Quaterniond uniform_quaternion(Rng& rng) {
  const double u1 = rng.canonical();
  const double u2 = rng.canonical();
  const double u3 = rng.canonical();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return Eigen::Quaterniond(a * std::sin(2.0 * kPi * u2),
                            a * std::cos(2.0 * kPi * u2),
                            b * std::sin(2.0 * kPi * u3),
                            b * std::cos(2.0 * kPi * u3));
}

}  // namespace scenegen_detail

/// Samples a world camera pose: position at uniform spherical coordinates
/// about the fixation point (world +z up, azimuth about +z from +x), oriented
/// to look at the fixation point with zero roll against world up. Returned
/// pose maps camera frame to world frame.
inline Pose sample_camera(const CameraSamplerConfig& cfg, Rng& rng) {
  const double az = rng.uniform(cfg.azimuth_min_deg, cfg.azimuth_max_deg) *
                    scenegen_detail::kPi / 180.0;
  const double el = rng.uniform(cfg.elevation_min_deg, cfg.elevation_max_deg) *
                    scenegen_detail::kPi / 180.0;
  const double d = rng.uniform(cfg.distance_min, cfg.distance_max);
  const Eigen::Vector3d offset(d * std::cos(el) * std::cos(az),
                               d * std::cos(el) * std::sin(az),
                               d * std::sin(el));
  const Eigen::Vector3d position = cfg.fixation + offset;

  const Eigen::Vector3d forward = (cfg.fixation - position).normalized();
  const Eigen::Vector3d world_up(0.0, 0.0, 1.0);
  Eigen::Vector3d right = forward.cross(world_up);
  const double rn = right.norm();
  // looking straight up/down: roll is arbitrary, pick a fixed one
  right = rn > 1e-12 ? Eigen::Vector3d(right / rn) : Eigen::Vector3d(1.0, 0.0, 0.0);
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;  // camera axes (x right, y down, z forward) in world
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose(Eigen::Quaterniond(r), position);
}

/// Samples a camera and drops object instances uniformly into the world box
/// with uniform orientations. Instances whose centroid falls behind the
/// camera or outside the image are re-drawn up to placement_retries times and
/// dropped after that; the returned sample reports the requested count.
inline SceneSample sample_scene(const std::vector<CuboidModel>& objects,
                                const std::vector<int>& counts,
                                const SceneGenConfig& cfg,
                                const CameraIntrinsics& k, Rng& rng) {
  SceneSample s;
  s.camera_pose = sample_camera(cfg.camera, rng);
  s.intrinsics = k;
  const Pose world_to_camera = s.camera_pose.inverse();
  const double half = 0.5 * cfg.world_box_extent;

  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const int want = oi < counts.size() ? counts[oi] : 0;
    for (int c = 0; c < want; ++c) {
      ++s.requested;
      for (int attempt = 0; attempt < cfg.placement_retries; ++attempt) {
        const Eigen::Vector3d pos =
            cfg.camera.fixation +
            Eigen::Vector3d(rng.uniform(-half, half), rng.uniform(-half, half),
                            rng.uniform(-half, half));
        const Pose world_pose(scenegen_detail::uniform_quaternion(rng), pos);
        const Pose cam_frame = world_to_camera.compose(world_pose);
        const Eigen::Vector3d centroid = cam_frame.translation;
        if (!(centroid.z() > 0.0)) continue;
        const Eigen::Vector2d px = project_point(centroid, k);
        if (px.x() < 0.0 || px.x() > k.width - 1 || px.y() < 0.0 ||
            px.y() > k.height - 1)
          continue;
        SceneSample::Instance inst;
        inst.object_index = static_cast<int>(oi);
        inst.object_name = objects[oi].name;
        inst.world_pose = world_pose;
        inst.camera_frame = cam_frame;
        s.instances.push_back(std::move(inst));
        break;
      }
    }
  }
  return s;
}

/// Labeled frame: ground-truth tensors plus the camera-frame poses that
/// generated them.
struct LabeledFrame {
  BeliefMapSet beliefs;
  VectorFieldSet fields;
  std::vector<std::pair<std::string, Pose>> ground_truth;  // (object name, pose)
};

/// Projects each instance's keypoints, converts to map coordinates, and
/// renders ground-truth labels. Projection failures (a corner behind the
/// camera) propagate.
inline LabeledFrame generate_labeled_frame(const SceneSample& s,
                                           const std::vector<CuboidModel>& objects,
                                           const LabelGenConfig& lcfg) {
  const int mw = s.intrinsics.width / lcfg.downscale;
  const int mh = s.intrinsics.height / lcfg.downscale;
  std::vector<MapKeypoints> instance_kps;
  LabeledFrame out;
  for (const auto& inst : s.instances) {
    const auto px = project_keypoints(objects[inst.object_index],
                                      inst.camera_frame, s.intrinsics);
    MapKeypoints mk;
    for (int i = 0; i < 9; ++i) mk[i] = image_to_map(px[i], lcfg);
    instance_kps.push_back(mk);
    out.ground_truth.emplace_back(inst.object_name, inst.camera_frame);
  }
  out.beliefs = render_belief_maps(instance_kps, lcfg, mh, mw);
  out.fields = render_vector_fields(instance_kps, lcfg, mh, mw);
  return out;
}

/// Robustness harness: adds i.i.d. Gaussian noise to belief cells (clamped to
/// [0,1]) and zeroes dropout_channels of the 8 vertex channels, chosen
/// uniformly without replacement (the matching field channels are zeroed too).
inline void corrupt_labels(BeliefMapSet& maps, VectorFieldSet& fields,
                           double noise_sigma, int dropout_channels, Rng& rng) {
  if (noise_sigma < 0.0)
    throw std::invalid_argument("corrupt_labels: noise_sigma must be >= 0");
  if (noise_sigma > 0.0) {
    for (float& v : maps.grid.data) {
      v = static_cast<float>(
          std::clamp(v + rng.gaussian(noise_sigma), 0.0, 1.0));
    }
  }
  const int k = std::clamp(dropout_channels, 0, 8);
  if (k > 0) {
    std::array<int, 8> chans{0, 1, 2, 3, 4, 5, 6, 7};
    for (int i = 0; i < k; ++i) {  // partial Fisher-Yates
      const int j = i + rng.uniform_int(8 - i);
      std::swap(chans[i], chans[j]);
    }
    for (int i = 0; i < k; ++i) {
      const int ch = chans[i];
      for (int y = 0; y < maps.height(); ++y)
        for (int x = 0; x < maps.width(); ++x) maps.grid.at(ch, y, x) = 0.0f;
      for (int y = 0; y < fields.height(); ++y)
        for (int x = 0; x < fields.width(); ++x) {
          fields.grid.at(2 * ch, y, x) = 0.0f;
          fields.grid.at(2 * ch + 1, y, x) = 0.0f;
        }
    }
  }
}

}  // namespace boxpose
