#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "boxpose/rng.hpp"
#include "boxpose/tensorio.hpp"

using namespace boxpose;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("boxpose_test_" + std::to_string(Rng(std::random_device{}()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("tensor round trip is bit identical") {
  TempDir dir;
  Tensor3 t(9, 60, 80);
  Rng rng(42);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-10.0, 10.0));
  const fs::path p = dir.path / "t.dtns";
  write_tensor(p, t);
  const Tensor3 back = read_tensor(p);
  CHECK(back == t);
}

TEST_CASE("reader rejects malformed files with distinct errors") {
  TempDir dir;
  Tensor3 t(2, 3, 4);
  for (std::size_t i = 0; i < t.data.size(); ++i)
    t.data[i] = static_cast<float>(i);
  const fs::path good = dir.path / "good.dtns";
  write_tensor(good, t);
  const std::string bytes = slurp(good);

  auto write_raw = [&](const std::string& name, const std::string& content) {
    const fs::path p = dir.path / name;
    std::ofstream f(p, std::ios::binary);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    return p;
  };

  auto code_of = [](const fs::path& p) {
    try {
      read_tensor(p);
    } catch (const TensorIoError& e) {
      return e.code;
    }
    FAIL("expected TensorIoError");
    return TensorIoError::Code::open_failed;
  };

  SECTION("short payload") {
    const auto p = write_raw("short.dtns", bytes.substr(0, bytes.size() - 5));
    CHECK(code_of(p) == TensorIoError::Code::short_payload);
  }
  SECTION("trailing bytes") {
    const auto p = write_raw("long.dtns", bytes + "xx");
    CHECK(code_of(p) == TensorIoError::Code::trailing_bytes);
  }
  SECTION("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    CHECK(code_of(write_raw("magic.dtns", b)) == TensorIoError::Code::bad_magic);
  }
  SECTION("bad version") {
    std::string b = bytes;
    b[4] = 9;
    CHECK(code_of(write_raw("ver.dtns", b)) == TensorIoError::Code::bad_version);
  }
  SECTION("bad dtype") {
    std::string b = bytes;
    b[24] = 7;  // dtype word sits after magic+version+ndims+3 dims
    CHECK(code_of(write_raw("dtype.dtns", b)) == TensorIoError::Code::bad_dtype);
  }
  SECTION("missing file") {
    CHECK(code_of(dir.path / "nope.dtns") == TensorIoError::Code::open_failed);
  }
}

TEST_CASE("dtns header layout is pinned little-endian") {
  TempDir dir;
  Tensor3 t(1, 1, 2);
  t.data = {1.0f, -2.5f};
  const fs::path p = dir.path / "pin.dtns";
  write_tensor(p, t);
  const std::string b = slurp(p);
  REQUIRE(b.size() == 12 + 12 + 4 + 8);
  CHECK(b.substr(0, 4) == "DTNS");
  const unsigned char* u = reinterpret_cast<const unsigned char*>(b.data());
  CHECK(u[4] == 1);  // version LE
  CHECK(u[5] == 0);
  CHECK(u[8] == 3);  // ndims
  CHECK(u[12] == 1);  // dims: 1, 1, 2
  CHECK(u[16] == 1);
  CHECK(u[20] == 2);
  CHECK(u[24] == 1);  // dtype f32
  // 1.0f little-endian = 00 00 80 3F
  CHECK(u[28] == 0x00);
  CHECK(u[29] == 0x00);
  CHECK(u[30] == 0x80);
  CHECK(u[31] == 0x3F);
}

TEST_CASE("object config parses and round trips") {
  const std::string text =
      "# comment line\n"
      "object cube 1 1 1\n"
      "object mug 0.09 0.09 0.12 mug_points.xyz\n";
  const auto objs = parse_object_config_text(text);
  REQUIRE(objs.size() == 2);
  CHECK(objs[0].name == "cube");
  CHECK(objs[0].dims == Eigen::Vector3d(1, 1, 1));
  CHECK(objs[0].pointcloud_path.empty());
  CHECK(objs[1].pointcloud_path == "mug_points.xyz");

  // serialize -> parse identity
  const auto again = parse_object_config_text(serialize_object_config(objs));
  REQUIRE(again.size() == objs.size());
  for (std::size_t i = 0; i < objs.size(); ++i) {
    CHECK(again[i].name == objs[i].name);
    CHECK(again[i].dims == objs[i].dims);
    CHECK(again[i].pointcloud_path == objs[i].pointcloud_path);
  }

  // cuboid keypoint order survives the round trip
  const auto kp_before = objs[0].cuboid().keypoints();
  const auto kp_after = again[0].cuboid().keypoints();
  for (int i = 0; i < 9; ++i) CHECK(kp_before[i] == kp_after[i]);
}

TEST_CASE("object config rejects duplicates and bad dims") {
  CHECK_THROWS_MATCHES(
      parse_object_config_text("object a 1 1 1\nobject a 2 2 2\n"), ParseError,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("duplicate object name 'a'")));
  CHECK_THROWS_AS(parse_object_config_text("object bad 0 1 1\n"), ParseError);
  CHECK_THROWS_AS(parse_object_config_text("object bad -1 1 1\n"), ParseError);
  CHECK_THROWS_AS(parse_object_config_text("thing a 1 1 1\n"), ParseError);
  CHECK_THROWS_AS(parse_object_config_text("object a 1 1\n"), ParseError);
}

TEST_CASE("manifest round trips value-exactly") {
  GroundTruthManifest m;
  Rng rng(7);
  for (int f = 0; f < 3; ++f) {
    FrameGroundTruth fr;
    fr.frame_id = f;
    fr.intrinsics = {500.25, 499.75, 320.125, 240.5, 640, 480};
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector3d axis =
          Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
              .normalized();
      fr.poses.emplace_back(
          "obj", Pose(Eigen::Quaterniond(Eigen::AngleAxisd(rng.uniform(0, 3), axis)),
                      Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                      rng.uniform(0.5, 2))));
    }
    m.frames.push_back(std::move(fr));
  }
  const std::string text = serialize_manifest(m);
  const GroundTruthManifest back = parse_manifest_text(text);
  REQUIRE(back.frames.size() == m.frames.size());
  for (std::size_t f = 0; f < m.frames.size(); ++f) {
    CHECK(back.frames[f].frame_id == m.frames[f].frame_id);
    CHECK(back.frames[f].intrinsics.fx == m.frames[f].intrinsics.fx);
    REQUIRE(back.frames[f].poses.size() == m.frames[f].poses.size());
    for (std::size_t i = 0; i < m.frames[f].poses.size(); ++i) {
      CHECK(back.frames[f].poses[i].first == m.frames[f].poses[i].first);
      CHECK(back.frames[f].poses[i].second.translation ==
            m.frames[f].poses[i].second.translation);
      CHECK(back.frames[f].poses[i].second.rotation.coeffs().isApprox(
          m.frames[f].poses[i].second.rotation.coeffs(), 1e-15));
    }
  }
  // serialize(parse(serialize(x))) == serialize(x)
  CHECK(serialize_manifest(back) == text);
}

TEST_CASE("manifest rejects off-norm quaternions but fixes near-unit ones") {
  const std::string head = "frame 0 500 500 320 240 640 480\n";
  CHECK_THROWS_AS(
      parse_manifest_text(head + "pose 0 cube 0.9 0 0 0 0 0 1\n"), ParseError);
  const auto ok =
      parse_manifest_text(head + "pose 0 cube 1.0004 0 0 0 0 0 1\n");
  REQUIRE(ok.frames.size() == 1);
  REQUIRE(ok.frames[0].poses.size() == 1);
  CHECK(std::abs(ok.frames[0].poses[0].second.rotation.norm() - 1.0) < 1e-12);
}

TEST_CASE("manifest rejects unknown rows and orphan poses") {
  CHECK_THROWS_AS(parse_manifest_text("bogus 1 2 3\n"), ParseError);
  CHECK_THROWS_AS(parse_manifest_text("pose 0 cube 1 0 0 0 0 0 1\n"), ParseError);
}

TEST_CASE("estimates round trip") {
  std::vector<PoseEstimate> rows(2);
  rows[0].frame_id = 3;
  rows[0].object_name = "cube";
  rows[0].pose = Pose(Eigen::Quaterniond(0.9238795325112867, 0.3826834323650898, 0, 0),
                      {0.1, -0.2, 1.5});
  rows[0].rmse = 0.125;
  rows[0].vertex_count = 7;
  rows[1].frame_id = 4;
  rows[1].object_name = "cube";
  rows[1].pose = Pose(Eigen::Quaterniond::Identity(), {0, 0, 1});
  rows[1].rmse = 0.0;
  rows[1].vertex_count = 8;

  const std::string text = serialize_estimates(rows);
  const auto back = parse_estimates_text(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].frame_id == 3);
  CHECK(back[0].vertex_count == 7);
  CHECK(back[0].rmse == 0.125);
  CHECK(back[0].pose.translation == rows[0].pose.translation);
  CHECK(serialize_estimates(back) == text);
}

TEST_CASE("pointcloud files parse") {
  TempDir dir;
  const fs::path p = dir.path / "cloud.xyz";
  write_text_file(p, "# cloud\n0 0 0\n0.5 -0.25 1.0\n");
  const auto pts = parse_pointcloud(p);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1] == Eigen::Vector3d(0.5, -0.25, 1.0));
  write_text_file(p, "1 2\n");
  CHECK_THROWS_AS(parse_pointcloud(p), ParseError);
}
