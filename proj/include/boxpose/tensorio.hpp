#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "boxpose/geometry.hpp"
#include "boxpose/metrics.hpp"
#include "boxpose/tensor.hpp"

namespace boxpose {

// DTNS tensor container, byte layout (all integers little-endian):
//   magic   4 bytes  "DTNS"
//   version u32      1
//   ndims   u32
//   dims    ndims x u32, slowest dimension first (channels, height, width)
//   dtype   u32      1 = 32-bit float, little-endian
//   payload product(dims) x f32
// Belief files carry dims[0] = 9, field files dims[0] = 16. Map dims are
// stored explicitly so external producers with other strides interoperate.

class TensorIoError : public std::runtime_error {
 public:
  enum class Code {
    open_failed,
    bad_magic,
    bad_version,
    bad_dtype,
    bad_header,
    short_payload,
    trailing_bytes,
  };
  TensorIoError(Code c, const std::string& what)
      : std::runtime_error(what), code(c) {}
  Code code;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, int line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        line_number(line) {}
  int line_number;
};

namespace ioutil {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

inline float get_f32(const unsigned char* p) {
  const std::uint32_t bits = get_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

// doubles round-trip exactly through %.17g
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ioutil

inline void write_tensor(const std::filesystem::path& path, const Tensor3& t) {
  std::string bytes;
  bytes.reserve(24 + t.size() * 4);
  bytes += "DTNS";
  ioutil::put_u32(bytes, 1);  // version
  ioutil::put_u32(bytes, 3);  // ndims
  ioutil::put_u32(bytes, static_cast<std::uint32_t>(t.channels));
  ioutil::put_u32(bytes, static_cast<std::uint32_t>(t.height));
  ioutil::put_u32(bytes, static_cast<std::uint32_t>(t.width));
  ioutil::put_u32(bytes, 1);  // dtype f32
  for (float v : t.data) ioutil::put_f32(bytes, v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw TensorIoError(TensorIoError::Code::open_failed,
                        "cannot open for write: " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f)
    throw TensorIoError(TensorIoError::Code::open_failed,
                        "write failed: " + path.string());
}

inline Tensor3 read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw TensorIoError(TensorIoError::Code::open_failed,
                        "cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || std::memcmp(p, "DTNS", 4) != 0)
    throw TensorIoError(TensorIoError::Code::bad_magic,
                        "not a DTNS file: " + path.string());
  if (ioutil::get_u32(p + 4) != 1)
    throw TensorIoError(TensorIoError::Code::bad_version,
                        "unsupported DTNS version in " + path.string());
  const std::uint32_t ndims = ioutil::get_u32(p + 8);
  if (ndims != 3)
    throw TensorIoError(TensorIoError::Code::bad_header,
                        "expected 3 dims, got " + std::to_string(ndims));
  if (size < 12 + 4 * ndims + 4)
    throw TensorIoError(TensorIoError::Code::bad_header,
                        "truncated header: " + path.string());
  std::array<std::uint32_t, 3> dims{};
  for (std::uint32_t i = 0; i < 3; ++i) dims[i] = ioutil::get_u32(p + 12 + 4 * i);
  const std::uint32_t dtype = ioutil::get_u32(p + 12 + 4 * ndims);
  if (dtype != 1)
    throw TensorIoError(TensorIoError::Code::bad_dtype,
                        "unsupported dtype code " + std::to_string(dtype));
  const std::size_t header = 12 + 4 * ndims + 4;
  const std::size_t count =
      static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (size < header + count * 4)
    throw TensorIoError(TensorIoError::Code::short_payload,
                        "short payload in " + path.string());
  if (size > header + count * 4)
    throw TensorIoError(TensorIoError::Code::trailing_bytes,
                        "trailing bytes in " + path.string());
  Tensor3 t(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
            static_cast<int>(dims[2]));
  for (std::size_t i = 0; i < count; ++i)
    t.data[i] = ioutil::get_f32(p + header + 4 * i);
  return t;
}

/// One entry of the object-model config: name, cuboid extents, optional
/// model-point-cloud file (plain text, one "x y z" triple per line).
struct ObjectConfig {
  std::string name;
  Eigen::Vector3d dims{0, 0, 0};
  std::string pointcloud_path;  // empty when absent

  CuboidModel cuboid() const { return CuboidModel{name, dims}; }
};

// Object config text format, one directive per line:
//   object <name> <dx> <dy> <dz> [pointcloud-path]
// '#' starts a comment; blank lines are ignored.
inline std::vector<ObjectConfig> parse_object_config_text(
    const std::string& text, const std::string& filename = "<string>") {
  std::vector<ObjectConfig> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok != "object")
      throw ParseError(filename, lineno, "unknown directive '" + tok + "'");
    ObjectConfig oc;
    if (!(ls >> oc.name >> oc.dims.x() >> oc.dims.y() >> oc.dims.z()))
      throw ParseError(filename, lineno, "expected: object <name> <dx> <dy> <dz>");
    ls >> oc.pointcloud_path;  // optional
    if (!(oc.dims.x() > 0 && oc.dims.y() > 0 && oc.dims.z() > 0))
      throw ParseError(filename, lineno,
                       "object '" + oc.name + "' has non-positive dims");
    for (const auto& prev : out)
      if (prev.name == oc.name)
        throw ParseError(filename, lineno, "duplicate object name '" + oc.name + "'");
    out.push_back(std::move(oc));
  }
  return out;
}

inline std::vector<ObjectConfig> parse_object_config(
    const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw TensorIoError(TensorIoError::Code::open_failed,
                        "cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_object_config_text(text, path.string());
}

inline std::string serialize_object_config(const std::vector<ObjectConfig>& objs) {
  std::string out;
  for (const auto& o : objs) {
    out += "object " + o.name + " " + ioutil::fmt(o.dims.x()) + " " +
           ioutil::fmt(o.dims.y()) + " " + ioutil::fmt(o.dims.z());
    if (!o.pointcloud_path.empty()) out += " " + o.pointcloud_path;
    out += "\n";
  }
  return out;
}

/// Ground truth for one frame: intrinsics plus the camera-frame pose of every
/// retained object instance.
struct FrameGroundTruth {
  int frame_id = 0;
  CameraIntrinsics intrinsics;
  std::vector<std::pair<std::string, Pose>> poses;  // (object name, pose)
};

struct GroundTruthManifest {
  std::vector<FrameGroundTruth> frames;
};

/// One pose estimate row as written by the detection command.
struct PoseEstimate {
  int frame_id = 0;
  std::string object_name;
  Pose pose;
  double rmse = 0.0;
  int vertex_count = 0;
};

// Manifest text format, one directive per line:
//   frame <id> <fx> <fy> <cx> <cy> <width> <height>
//   pose <frame-id> <object> <qw> <qx> <qy> <qz> <tx> <ty> <tz>
// Estimates files use:
//   est <frame-id> <object> <qw> <qx> <qy> <qz> <tx> <ty> <tz> <rmse> <vertices>
// Quaternions are wxyz order; they are renormalized on load when off by less
// than 1e-3 and rejected beyond that.

namespace ioutil {

inline Eigen::Quaterniond parse_quaternion(double w, double x, double y, double z,
                                           const std::string& file, int lineno) {
  Eigen::Quaterniond q(w, x, y, z);
  const double norm = q.norm();
  if (std::abs(norm - 1.0) >= 1e-3)
    throw ParseError(file, lineno,
                     "quaternion norm " + std::to_string(norm) + " too far from 1");
  return q.normalized();
}

}  // namespace ioutil

inline std::string serialize_manifest(const GroundTruthManifest& m) {
  std::string out;
  for (const auto& fr : m.frames) {
    out += "frame " + std::to_string(fr.frame_id) + " " +
           ioutil::fmt(fr.intrinsics.fx) + " " + ioutil::fmt(fr.intrinsics.fy) +
           " " + ioutil::fmt(fr.intrinsics.cx) + " " +
           ioutil::fmt(fr.intrinsics.cy) + " " +
           std::to_string(fr.intrinsics.width) + " " +
           std::to_string(fr.intrinsics.height) + "\n";
    for (const auto& [name, pose] : fr.poses) {
      const auto& q = pose.rotation;
      const auto& t = pose.translation;
      out += "pose " + std::to_string(fr.frame_id) + " " + name + " " +
             ioutil::fmt(q.w()) + " " + ioutil::fmt(q.x()) + " " +
             ioutil::fmt(q.y()) + " " + ioutil::fmt(q.z()) + " " +
             ioutil::fmt(t.x()) + " " + ioutil::fmt(t.y()) + " " +
             ioutil::fmt(t.z()) + "\n";
    }
  }
  return out;
}

inline GroundTruthManifest parse_manifest_text(const std::string& text,
                                               const std::string& filename = "<string>") {
  GroundTruthManifest m;
  std::map<int, std::size_t> frame_index;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "frame") {
      FrameGroundTruth fr;
      if (!(ls >> fr.frame_id >> fr.intrinsics.fx >> fr.intrinsics.fy >>
            fr.intrinsics.cx >> fr.intrinsics.cy >> fr.intrinsics.width >>
            fr.intrinsics.height))
        throw ParseError(filename, lineno, "malformed frame row");
      try {
        validate(fr.intrinsics);
      } catch (const std::invalid_argument& e) {
        throw ParseError(filename, lineno, e.what());
      }
      frame_index[fr.frame_id] = m.frames.size();
      m.frames.push_back(std::move(fr));
    } else if (tok == "pose") {
      int fid = 0;
      std::string name;
      double qw, qx, qy, qz, tx, ty, tz;
      if (!(ls >> fid >> name >> qw >> qx >> qy >> qz >> tx >> ty >> tz))
        throw ParseError(filename, lineno, "malformed pose row");
      const auto it = frame_index.find(fid);
      if (it == frame_index.end())
        throw ParseError(filename, lineno,
                         "pose row references unknown frame " + std::to_string(fid));
      const Eigen::Quaterniond q =
          ioutil::parse_quaternion(qw, qx, qy, qz, filename, lineno);
      m.frames[it->second].poses.emplace_back(
          name, Pose(q, Eigen::Vector3d(tx, ty, tz)));
    } else {
      throw ParseError(filename, lineno, "unknown directive '" + tok + "'");
    }
  }
  return m;
}

inline GroundTruthManifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw TensorIoError(TensorIoError::Code::open_failed,
                        "cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_manifest_text(text, path.string());
}

inline std::string serialize_estimates(const std::vector<PoseEstimate>& rows) {
  std::string out;
  for (const auto& e : rows) {
    const auto& q = e.pose.rotation;
    const auto& t = e.pose.translation;
    out += "est " + std::to_string(e.frame_id) + " " + e.object_name + " " +
           ioutil::fmt(q.w()) + " " + ioutil::fmt(q.x()) + " " +
           ioutil::fmt(q.y()) + " " + ioutil::fmt(q.z()) + " " +
           ioutil::fmt(t.x()) + " " + ioutil::fmt(t.y()) + " " +
           ioutil::fmt(t.z()) + " " + ioutil::fmt(e.rmse) + " " +
           std::to_string(e.vertex_count) + "\n";
  }
  return out;
}

inline std::vector<PoseEstimate> parse_estimates_text(
    const std::string& text, const std::string& filename = "<string>") {
  std::vector<PoseEstimate> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok != "est")
      throw ParseError(filename, lineno, "unknown directive '" + tok + "'");
    PoseEstimate e;
    double qw, qx, qy, qz, tx, ty, tz;
    if (!(ls >> e.frame_id >> e.object_name >> qw >> qx >> qy >> qz >> tx >>
          ty >> tz >> e.rmse >> e.vertex_count))
      throw ParseError(filename, lineno, "malformed est row");
    e.pose = Pose(ioutil::parse_quaternion(qw, qx, qy, qz, filename, lineno),
                  Eigen::Vector3d(tx, ty, tz));
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<PoseEstimate> parse_estimates(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw TensorIoError(TensorIoError::Code::open_failed,
                        "cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_estimates_text(text, path.string());
}

inline ModelPointCloud parse_pointcloud(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw TensorIoError(TensorIoError::Code::open_failed,
                        "cannot open: " + path.string());
  ModelPointCloud pts;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x)) continue;
    if (!(ls >> y >> z))
      throw ParseError(path.string(), lineno, "expected 3 coordinates");
    pts.emplace_back(x, y, z);
  }
  return pts;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw TensorIoError(TensorIoError::Code::open_failed,
                        "cannot open for write: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace boxpose
