#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "boxpose/detection.hpp"
#include "boxpose/geometry.hpp"
#include "boxpose/labelgen.hpp"
#include "boxpose/metrics.hpp"
#include "boxpose/pnp.hpp"
#include "boxpose/scenegen.hpp"
#include "boxpose/tensorio.hpp"

namespace boxpose {

/// Everything the CLI commands need: sub-configs, the object set, seed, and
/// the parallelism degree. Loaded from a JSON file; every field has a default
/// except the object config path.
struct PipelineConfig {
  std::filesystem::path object_config_path;
  std::vector<ObjectConfig> objects;
  std::vector<int> instance_counts;  // per object, same order
  CameraIntrinsics intrinsics{500.0, 500.0, 320.0, 240.0, 640, 480};
  LabelGenConfig labelgen;
  DetectionConfig detection;
  SceneGenConfig scene;
  double metrics_max_threshold = 0.10;
  int metrics_num_samples = 100;
  int metrics_model_points = 500;
  std::uint64_t seed = 0;
  int parallelism = 1;

  std::vector<CuboidModel> cuboids() const {
    std::vector<CuboidModel> out;
    for (const auto& o : objects) out.push_back(o.cuboid());
    return out;
  }
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }

  PipelineConfig c;
  try {
    if (!j.contains("object_config"))
      throw ConfigError(path.string() + ": missing required key 'object_config'");
    c.object_config_path = j["object_config"].get<std::string>();
    if (c.object_config_path.is_relative())
      c.object_config_path = path.parent_path() / c.object_config_path;
    c.seed = j.value("seed", std::uint64_t{0});
    c.parallelism = j.value("parallelism", 1);

    if (j.contains("camera")) {
      const auto& k = j["camera"];
      c.intrinsics.fx = k.value("fx", c.intrinsics.fx);
      c.intrinsics.fy = k.value("fy", c.intrinsics.fy);
      c.intrinsics.cx = k.value("cx", c.intrinsics.cx);
      c.intrinsics.cy = k.value("cy", c.intrinsics.cy);
      c.intrinsics.width = k.value("width", c.intrinsics.width);
      c.intrinsics.height = k.value("height", c.intrinsics.height);
    }
    if (j.contains("labelgen")) {
      const auto& l = j["labelgen"];
      c.labelgen.sigma = l.value("sigma", c.labelgen.sigma);
      c.labelgen.vector_radius = l.value("vector_radius", c.labelgen.vector_radius);
      c.labelgen.downscale = l.value("downscale", c.labelgen.downscale);
    }
    if (j.contains("detection")) {
      const auto& d = j["detection"];
      c.detection.peak_threshold = d.value("peak_threshold", c.detection.peak_threshold);
      c.detection.nms_window = d.value("nms_window", c.detection.nms_window);
      c.detection.refine_window = d.value("refine_window", c.detection.refine_window);
      c.detection.smooth_sigma = d.value("smooth_sigma", c.detection.smooth_sigma);
      c.detection.angle_threshold = d.value("angle_threshold", c.detection.angle_threshold);
      c.detection.min_vertices = d.value("min_vertices", c.detection.min_vertices);
    }
    if (j.contains("sampler")) {
      const auto& s = j["sampler"];
      auto range = [&](const char* key, double& lo, double& hi) {
        if (s.contains(key)) {
          lo = s[key].at(0).get<double>();
          hi = s[key].at(1).get<double>();
        }
      };
      range("azimuth_deg", c.scene.camera.azimuth_min_deg, c.scene.camera.azimuth_max_deg);
      range("elevation_deg", c.scene.camera.elevation_min_deg, c.scene.camera.elevation_max_deg);
      range("distance_m", c.scene.camera.distance_min, c.scene.camera.distance_max);
      c.scene.world_box_extent = s.value("world_box_m", c.scene.world_box_extent);
      c.scene.placement_retries = s.value("placement_retries", c.scene.placement_retries);
      if (s.contains("instances_per_object")) {
        if (s["instances_per_object"].is_array())
          c.instance_counts = s["instances_per_object"].get<std::vector<int>>();
        else
          c.instance_counts.assign(1, s["instances_per_object"].get<int>());
      }
    }
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      c.metrics_max_threshold = m.value("max_threshold_m", c.metrics_max_threshold);
      c.metrics_num_samples = m.value("num_samples", c.metrics_num_samples);
      c.metrics_model_points = m.value("model_points", c.metrics_model_points);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }

  c.objects = parse_object_config(c.object_config_path);
  if (c.objects.empty())
    throw ConfigError(c.object_config_path.string() + ": no objects defined");
  if (c.instance_counts.empty()) c.instance_counts.assign(c.objects.size(), 1);
  c.instance_counts.resize(c.objects.size(),
                           c.instance_counts.empty() ? 1 : c.instance_counts.back());

  validate(c.intrinsics);
  validate(c.labelgen);
  validate(c.detection);
  validate(c.scene.camera);
  for (const auto& o : c.objects) validate(o.cuboid());
  if (c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  return c;
}

namespace pipeline_detail {

/// Runs fn(i) for i in [0, total), across `degree` threads. Any exception is
/// rethrown on the calling thread. Work is index-addressed so results are
/// identical regardless of scheduling.
inline void parallel_for(int total, int degree, const std::function<void(int)>& fn) {
  if (total <= 0) return;
  if (degree <= 1 || total == 1) {
    for (int i = 0; i < total; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= total) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::min(degree, total);
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string frame_file(const char* prefix, int frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%06d.dtns", prefix, frame_id);
  return buf;
}

}  // namespace pipeline_detail

/// Deterministically generates one frame. Per-frame streams are derived from
/// the run seed by the documented splitting rule: frame_seed =
/// split(seed, index); the scene sampler, label tie-breaking, and label
/// corruption draw from split(frame_seed, 0 / 1 / 2) respectively.
struct GeneratedFrame {
  SceneSample sample;
  LabeledFrame labels;
};

inline GeneratedFrame generate_frame(const PipelineConfig& cfg, int frame_index) {
  const std::uint64_t frame_seed = Rng::split(cfg.seed, static_cast<std::uint64_t>(frame_index));
  Rng scene_rng(Rng::split(frame_seed, 0));
  GeneratedFrame out;
  out.sample = sample_scene(cfg.cuboids(), cfg.instance_counts, cfg.scene,
                            cfg.intrinsics, scene_rng);
  LabelGenConfig lcfg = cfg.labelgen;
  lcfg.rng_seed = Rng::split(frame_seed, 1);
  out.labels = generate_labeled_frame(out.sample, cfg.cuboids(), lcfg);
  return out;
}

/// Vertex peaks closer than this (in map cells) to the map border carry a
/// border-pinned subpixel estimate — an out-of-map keypoint leaves a tail
/// whose in-grid maximum sits on the edge — and are excluded from the solve.
inline constexpr double kBorderMarginCells = 1.5;

/// Detection + pose recovery for one frame's tensors. Correspondences are the
/// assigned vertex peaks away from the map border plus the centroid peak
/// (model point = object origin); instances with fewer than 4 usable vertices
/// or whose solve fails are skipped.
inline std::vector<PoseEstimate> estimate_poses(const BeliefMapSet& maps,
                                                const VectorFieldSet& fields,
                                                const PipelineConfig& cfg,
                                                int frame_id) {
  const CuboidModel model = cfg.objects.front().cuboid();
  const auto model_kps = model.keypoints();
  const auto instances = detect(maps, fields, cfg.detection, cfg.labelgen.downscale);
  const double s = static_cast<double>(cfg.labelgen.downscale);
  const double mw = maps.width(), mh = maps.height();

  std::vector<PoseEstimate> out;
  for (const auto& inst : instances) {
    Correspondences corr;
    int used = 0;
    for (int k = 0; k < 8; ++k) {
      if (!inst.vertices[k].has_value()) continue;
      const Eigen::Vector2d mp = inst.vertices[k]->pos / s;
      if (std::min(std::min(mp.x(), mw - 1 - mp.x()),
                   std::min(mp.y(), mh - 1 - mp.y())) < kBorderMarginCells)
        continue;
      corr.add(model_kps[k], inst.vertices[k]->pos);
      ++used;
    }
    if (used < 4) continue;
    corr.add(model_kps[8], inst.centroid.pos);
    try {
      PnpSolution sol = solve_epnp(corr, cfg.intrinsics);
      sol = refine_gauss_newton(sol, corr, cfg.intrinsics);
      PoseEstimate e;
      e.frame_id = frame_id;
      e.object_name = model.name;
      e.pose = sol.pose;
      e.rmse = sol.reprojection_rmse;
      e.vertex_count = used;
      out.push_back(std::move(e));
    } catch (const PnpError&) {
      // unsolvable hypothesis; detection already reported it, drop here
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateResult {
  int frames_written = 0;
  std::filesystem::path manifest_path;
};

inline GenerateResult cmd_generate(const PipelineConfig& cfg, int num_frames,
                                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  GroundTruthManifest manifest;
  manifest.frames.resize(num_frames);

  pipeline_detail::parallel_for(num_frames, cfg.parallelism, [&](int i) {
    const GeneratedFrame fr = generate_frame(cfg, i);
    write_tensor(out_dir / pipeline_detail::frame_file("belief", i),
                 fr.labels.beliefs.grid);
    write_tensor(out_dir / pipeline_detail::frame_file("fields", i),
                 fr.labels.fields.grid);
    FrameGroundTruth gt;
    gt.frame_id = i;
    gt.intrinsics = cfg.intrinsics;
    gt.poses = fr.labels.ground_truth;
    manifest.frames[i] = std::move(gt);  // distinct slots, no lock needed
  });

  GenerateResult res;
  res.frames_written = num_frames;
  res.manifest_path = out_dir / "gt.txt";
  write_text_file(res.manifest_path, serialize_manifest(manifest));
  return res;
}

// ---------------------------------------------------------------------------
// detect

struct DetectResult {
  std::vector<PoseEstimate> rows;
  std::vector<std::string> frame_errors;  // human-readable, one per bad frame
};

inline DetectResult cmd_detect(const PipelineConfig& cfg,
                               const std::filesystem::path& in_dir,
                               const std::filesystem::path& out_file) {
  if (cfg.objects.size() != 1)
    throw ConfigError(
        "detect: tensors carry no object class; config must define exactly "
        "one object");
  std::vector<int> frame_ids;
  for (const auto& entry : std::filesystem::directory_iterator(in_dir)) {
    const std::string name = entry.path().filename().string();
    int id = 0;
    if (std::sscanf(name.c_str(), "belief_%d.dtns", &id) == 1)
      frame_ids.push_back(id);
  }
  std::sort(frame_ids.begin(), frame_ids.end());

  std::vector<std::vector<PoseEstimate>> per_frame(frame_ids.size());
  std::vector<std::string> errors(frame_ids.size());

  pipeline_detail::parallel_for(
      static_cast<int>(frame_ids.size()), cfg.parallelism, [&](int idx) {
        const int id = frame_ids[idx];
        try {
          const Tensor3 braw =
              read_tensor(in_dir / pipeline_detail::frame_file("belief", id));
          const Tensor3 fraw =
              read_tensor(in_dir / pipeline_detail::frame_file("fields", id));
          if (braw.channels != BeliefMapSet::kChannels ||
              fraw.channels != VectorFieldSet::kChannels)
            throw std::runtime_error("unexpected channel count");
          if (braw.height != fraw.height || braw.width != fraw.width)
            throw std::runtime_error("belief/field shape mismatch");
          if (!braw.all_finite() || !fraw.all_finite())
            throw std::runtime_error("non-finite cells");
          per_frame[idx] = estimate_poses(BeliefMapSet(braw),
                                          VectorFieldSet(fraw), cfg, id);
        } catch (const std::exception& e) {
          errors[idx] = "frame " + std::to_string(id) + ": " + e.what();
        }
      });

  DetectResult res;
  for (std::size_t i = 0; i < per_frame.size(); ++i) {
    for (auto& row : per_frame[i]) res.rows.push_back(std::move(row));
    if (!errors[i].empty()) res.frame_errors.push_back(errors[i]);
  }
  if (!out_file.empty())
    write_text_file(out_file, serialize_estimates(res.rows));
  return res;
}

// ---------------------------------------------------------------------------
// evaluate

struct ObjectEvaluation {
  std::string name;
  EvaluationCurve curve;
  double accuracy_2cm = 0.0;
  int ground_truth_count = 0;
  int matched_count = 0;
  int spurious_count = 0;
  std::vector<double> errors;  // per GT instance; +inf = missed
};

struct EvaluateResult {
  std::vector<ObjectEvaluation> objects;
};

namespace pipeline_detail {

/// Greedy ascending-ADD one-to-one matching between the estimates and ground
/// truth of one (frame, object) group.
inline void match_group(const std::vector<Pose>& gt, const std::vector<Pose>& est,
                        const ModelPointCloud& pts, std::vector<double>& errors_out,
                        int& spurious_out) {
  struct Pair {
    double add;
    std::size_t g, e;
  };
  std::vector<Pair> pairs;
  for (std::size_t g = 0; g < gt.size(); ++g)
    for (std::size_t e = 0; e < est.size(); ++e)
      pairs.push_back({add_metric(gt[g], est[e], pts), g, e});
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.add < b.add; });
  std::vector<bool> gt_used(gt.size(), false), est_used(est.size(), false);
  std::vector<double> err(gt.size(), std::numeric_limits<double>::infinity());
  std::size_t matched = 0;
  for (const Pair& p : pairs) {
    if (gt_used[p.g] || est_used[p.e]) continue;
    gt_used[p.g] = true;
    est_used[p.e] = true;
    err[p.g] = p.add;
    ++matched;
  }
  for (double e : err) errors_out.push_back(e);
  spurious_out += static_cast<int>(est.size() - matched);
}

inline ModelPointCloud model_points_for(const ObjectConfig& obj,
                                        const PipelineConfig& cfg) {
  if (!obj.pointcloud_path.empty()) {
    std::filesystem::path p = obj.pointcloud_path;
    if (p.is_relative()) p = cfg.object_config_path.parent_path() / p;
    return parse_pointcloud(p);
  }
  return cuboid_surface_points(obj.cuboid(), cfg.metrics_model_points);
}

}  // namespace pipeline_detail

inline EvaluateResult evaluate_estimates(const PipelineConfig& cfg,
                                         const GroundTruthManifest& manifest,
                                         const std::vector<PoseEstimate>& estimates) {
  std::map<std::string, const ObjectConfig*> by_name;
  for (const auto& o : cfg.objects) by_name[o.name] = &o;
  for (const auto& e : estimates)
    if (!by_name.count(e.object_name))
      throw ConfigError("estimates reference object '" + e.object_name +
                        "' absent from the object config");

  // (frame, object) -> estimates
  std::map<std::pair<int, std::string>, std::vector<Pose>> est_groups;
  for (const auto& e : estimates)
    est_groups[{e.frame_id, e.object_name}].push_back(e.pose);

  EvaluateResult res;
  for (const auto& o : cfg.objects) {
    ObjectEvaluation oe;
    oe.name = o.name;
    const ModelPointCloud pts = pipeline_detail::model_points_for(o, cfg);
    for (const auto& fr : manifest.frames) {
      std::vector<Pose> gt;
      for (const auto& [name, pose] : fr.poses)
        if (name == o.name) gt.push_back(pose);
      const auto it = est_groups.find({fr.frame_id, o.name});
      static const std::vector<Pose> kNone;
      const std::vector<Pose>& est = it == est_groups.end() ? kNone : it->second;
      if (gt.empty() && est.empty()) continue;
      oe.ground_truth_count += static_cast<int>(gt.size());
      pipeline_detail::match_group(gt, est, pts, oe.errors, oe.spurious_count);
    }
    for (double e : oe.errors) oe.matched_count += std::isfinite(e) ? 1 : 0;
    if (!oe.errors.empty()) {
      oe.curve = accuracy_curve(oe.errors, cfg.metrics_max_threshold,
                                cfg.metrics_num_samples);
      oe.accuracy_2cm = accuracy_at(oe.errors, 0.02);
    }
    res.objects.push_back(std::move(oe));
  }
  return res;
}

inline EvaluateResult cmd_evaluate(const PipelineConfig& cfg,
                                   const std::filesystem::path& est_path,
                                   const std::filesystem::path& gt_path,
                                   const std::filesystem::path& out_csv) {
  const GroundTruthManifest manifest = parse_manifest(gt_path);
  const std::vector<PoseEstimate> estimates = parse_estimates(est_path);
  EvaluateResult res = evaluate_estimates(cfg, manifest, estimates);
  if (!out_csv.empty()) {
    for (const auto& oe : res.objects) {
      if (oe.errors.empty()) continue;
      std::filesystem::path path = out_csv;
      if (res.objects.size() > 1) {
        path = out_csv.parent_path() /
               (out_csv.stem().string() + "_" + oe.name +
                out_csv.extension().string());
      }
      write_text_file(path, curve_to_csv(oe.curve));
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// roundtrip

struct RoundtripResult {
  int frames = 0;
  int retained_instances = 0;   // ground truth emitted by the sampler
  int recovered_instances = 0;  // matched to an estimate
  double auc = 0.0;
  double accuracy_2cm = 0.0;
  double median_add = std::numeric_limits<double>::infinity();  // matched only
  double ms_per_frame = 0.0;

  /// Everything except timing, for determinism checks and logging.
  std::string summary_without_timing() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "frames=%d retained=%d recovered=%d auc=%.6f acc2cm=%.6f "
                  "median_add=%.9f",
                  frames, retained_instances, recovered_instances, auc,
                  accuracy_2cm, median_add);
    return buf;
  }
};

inline RoundtripResult cmd_roundtrip(const PipelineConfig& cfg, int num_frames,
                                     double noise_sigma = 0.0,
                                     int dropout_channels = 0) {
  struct FrameOut {
    std::vector<std::pair<std::string, Pose>> gt;
    std::vector<PoseEstimate> est;
  };
  std::vector<FrameOut> frames(num_frames);

  const auto t0 = std::chrono::steady_clock::now();
  pipeline_detail::parallel_for(num_frames, cfg.parallelism, [&](int i) {
    GeneratedFrame fr = generate_frame(cfg, i);
    if (noise_sigma > 0.0 || dropout_channels > 0) {
      const std::uint64_t frame_seed =
          Rng::split(cfg.seed, static_cast<std::uint64_t>(i));
      Rng corrupt_rng(Rng::split(frame_seed, 2));
      corrupt_labels(fr.labels.beliefs, fr.labels.fields, noise_sigma,
                     dropout_channels, corrupt_rng);
    }
    frames[i].gt = fr.labels.ground_truth;
    frames[i].est = estimate_poses(fr.labels.beliefs, fr.labels.fields, cfg, i);
  });
  const auto t1 = std::chrono::steady_clock::now();

  GroundTruthManifest manifest;
  std::vector<PoseEstimate> estimates;
  for (int i = 0; i < num_frames; ++i) {
    FrameGroundTruth gt;
    gt.frame_id = i;
    gt.intrinsics = cfg.intrinsics;
    gt.poses = frames[i].gt;
    manifest.frames.push_back(std::move(gt));
    for (auto& e : frames[i].est) estimates.push_back(std::move(e));
  }
  const EvaluateResult eval = evaluate_estimates(cfg, manifest, estimates);

  RoundtripResult res;
  res.frames = num_frames;
  std::vector<double> all_errors;
  std::vector<double> matched_errors;
  for (const auto& oe : eval.objects) {
    res.retained_instances += oe.ground_truth_count;
    res.recovered_instances += oe.matched_count;
    for (double e : oe.errors) {
      all_errors.push_back(e);
      if (std::isfinite(e)) matched_errors.push_back(e);
    }
  }
  if (!all_errors.empty()) {
    const EvaluationCurve curve = accuracy_curve(
        all_errors, cfg.metrics_max_threshold, cfg.metrics_num_samples);
    res.auc = curve.auc;
    res.accuracy_2cm = accuracy_at(all_errors, 0.02);
  }
  if (!matched_errors.empty()) {
    std::sort(matched_errors.begin(), matched_errors.end());
    res.median_add = matched_errors[matched_errors.size() / 2];
  }
  res.ms_per_frame =
      num_frames > 0
          ? std::chrono::duration<double, std::milli>(t1 - t0).count() / num_frames
          : 0.0;
  return res;
}

// ---------------------------------------------------------------------------
// bench

struct BenchResult {
  struct Stage {
    std::string name;
    double median_ms = 0.0;
    double mean_ms = 0.0;
  };
  std::vector<Stage> stages;
  double median_total_ms = 0.0;

  std::string table() const {
    std::string out = "stage        median_ms  mean_ms\n";
    char buf[96];
    for (const auto& s : stages) {
      std::snprintf(buf, sizeof(buf), "%-12s %9.4f %8.4f\n", s.name.c_str(),
                    s.median_ms, s.mean_ms);
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-12s %9.4f\n", "total", median_total_ms);
    out += buf;
    return out;
  }
};

/// Benchmarks the post-processing stages (peak extraction, association, pose
/// recovery) over freshly generated frames. Label generation is not timed.
inline BenchResult cmd_bench(const PipelineConfig& cfg, int num_frames) {
  std::vector<GeneratedFrame> frames(num_frames);
  for (int i = 0; i < num_frames; ++i) frames[i] = generate_frame(cfg, i);

  std::vector<double> t_extract, t_assoc, t_pnp, t_total;
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  const CuboidModel model = cfg.objects.front().cuboid();
  const auto model_kps = model.keypoints();
  for (const auto& fr : frames) {
    const auto a = clock::now();
    std::array<std::vector<Peak>, 8> vertex_peaks;
    for (int k = 0; k < 8; ++k)
      vertex_peaks[k] = extract_peaks(fr.labels.beliefs.grid, k, cfg.detection);
    std::vector<Peak> centroid_peaks =
        extract_peaks(fr.labels.beliefs.grid, 8, cfg.detection);
    const auto b = clock::now();
    auto instances = associate_instances(vertex_peaks, centroid_peaks,
                                         fr.labels.fields, cfg.detection);
    const auto c = clock::now();
    const double s = static_cast<double>(cfg.labelgen.downscale);
    const double mw = fr.labels.beliefs.width(), mh = fr.labels.beliefs.height();
    for (auto& inst : instances) {
      Correspondences corr;
      int used = 0;
      for (int k = 0; k < 8; ++k) {
        if (!inst.vertices[k].has_value()) continue;
        const Eigen::Vector2d& mp = inst.vertices[k]->pos;
        if (std::min(std::min(mp.x(), mw - 1 - mp.x()),
                     std::min(mp.y(), mh - 1 - mp.y())) < kBorderMarginCells)
          continue;
        corr.add(model_kps[k], mp * s);
        ++used;
      }
      if (used < 4) continue;
      corr.add(model_kps[8], inst.centroid.pos * s);
      try {
        PnpSolution sol = solve_epnp(corr, cfg.intrinsics);
        refine_gauss_newton(sol, corr, cfg.intrinsics);
      } catch (const PnpError&) {
      }
    }
    const auto d = clock::now();
    t_extract.push_back(ms(a, b));
    t_assoc.push_back(ms(b, c));
    t_pnp.push_back(ms(c, d));
    t_total.push_back(ms(a, d));
  }

  auto summarize = [](std::vector<double> v, const std::string& name) {
    BenchResult::Stage s;
    s.name = name;
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean_ms = sum / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    s.median_ms = v[v.size() / 2];
    return s;
  };
  BenchResult res;
  res.stages.push_back(summarize(t_extract, "extract"));
  res.stages.push_back(summarize(t_assoc, "associate"));
  res.stages.push_back(summarize(t_pnp, "pnp"));
  if (!t_total.empty()) {
    std::sort(t_total.begin(), t_total.end());
    res.median_total_ms = t_total[t_total.size() / 2];
  }
  return res;
}

}  // namespace boxpose
