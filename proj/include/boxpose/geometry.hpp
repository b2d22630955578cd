#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <stdexcept>
#include <string>

namespace boxpose {

// Camera frame convention used everywhere in this library:
//   +x right, +y down, +z forward (optical axis).
// Image origin is the top-left corner and pixel centers sit at integer
// coordinates. Images are assumed rectified (no distortion model).

/// Pinhole camera intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

inline void validate(const CameraIntrinsics& k) {
  if (!(k.fx > 0.0) || !(k.fy > 0.0))
    throw std::invalid_argument("intrinsics: focal lengths must be positive");
  if (!(k.cx > 0.0 && k.cx < k.width) || !(k.cy > 0.0 && k.cy < k.height))
    throw std::invalid_argument("intrinsics: principal point outside image");
}

/// Rigid transform, object frame to camera frame (or world to world for the
/// scene sampler). Rotation is stored as a unit quaternion and normalized on
/// construction; matrices are materialized on demand.
struct Pose {
  Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation{0.0, 0.0, 0.0};

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
      : rotation(q.normalized()), translation(t) {}

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  /// this ∘ other: applies `other` first, then this transform.
  Pose compose(const Pose& other) const {
    return Pose(rotation * other.rotation,
                rotation * other.translation + translation);
  }

  Pose inverse() const {
    const Eigen::Quaterniond qi = rotation.conjugate();
    return Pose(qi, qi * (-translation));
  }

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }
};

/// Smallest rotation angle (radians) taking a.rotation to b.rotation.
inline double rotation_angle_between(const Eigen::Quaterniond& a,
                                     const Eigen::Quaterniond& b) {
  const double d = std::min(1.0, std::abs(a.dot(b)));
  return 2.0 * std::acos(d);
}

/// An object's 3D bounding cuboid, centered at the object origin. Yields the
/// 9 canonical keypoints: 8 corners plus the centroid.
///
/// Corner order is fixed: index i in [0,8) has sign pattern
///   x: -,+ alternating fastest (bit 0), y: bit 1, z: bit 2 (slowest),
/// i.e. corners enumerated z-major, then y, then x, minus sign first.
/// Keypoint 8 is the centroid (object origin).
struct CuboidModel {
  std::string name;
  Eigen::Vector3d dims{0.0, 0.0, 0.0};  // full extents (x, y, z) in meters

  std::array<Eigen::Vector3d, 9> keypoints() const {
    std::array<Eigen::Vector3d, 9> pts;
    const Eigen::Vector3d h = 0.5 * dims;
    for (int i = 0; i < 8; ++i) {
      pts[i] = Eigen::Vector3d((i & 1) ? h.x() : -h.x(),
                               (i & 2) ? h.y() : -h.y(),
                               (i & 4) ? h.z() : -h.z());
    }
    pts[8] = Eigen::Vector3d::Zero();
    return pts;
  }
};

inline void validate(const CuboidModel& m) {
  if (!(m.dims.x() > 0.0 && m.dims.y() > 0.0 && m.dims.z() > 0.0))
    throw std::invalid_argument("cuboid '" + m.name +
                                "': all dims must be positive");
}

/// Thrown when a point to be projected lies at or behind the camera plane.
/// keypoint_index is the offending index for keypoint-set projections, -1 for
/// single points.
class ProjectionError : public std::runtime_error {
 public:
  explicit ProjectionError(int index)
      : std::runtime_error(index < 0 ? "behind camera"
                                     : "behind camera (keypoint " +
                                           std::to_string(index) + ")"),
        keypoint_index(index) {}
  int keypoint_index;
};

/// Pinhole projection of a camera-frame point to pixel coordinates.
inline Eigen::Vector2d project_point(const Eigen::Vector3d& p,
                                     const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) throw ProjectionError(-1);
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

/// The 9 cuboid keypoints transformed into the camera frame.
inline std::array<Eigen::Vector3d, 9> cuboid_keypoints(const CuboidModel& m,
                                                       const Pose& pose) {
  std::array<Eigen::Vector3d, 9> out;
  const auto local = m.keypoints();
  for (int i = 0; i < 9; ++i) out[i] = pose.apply(local[i]);
  return out;
}

/// Projects all 9 keypoints to pixels. Throws ProjectionError carrying the
/// first offending keypoint index if any point has non-positive depth.
inline std::array<Eigen::Vector2d, 9> project_keypoints(
    const CuboidModel& m, const Pose& pose, const CameraIntrinsics& k) {
  const auto cam = cuboid_keypoints(m, pose);
  std::array<Eigen::Vector2d, 9> out;
  for (int i = 0; i < 9; ++i) {
    if (!(cam[i].z() > 0.0)) throw ProjectionError(i);
    out[i] = project_point(cam[i], k);
  }
  return out;
}

}  // namespace boxpose
