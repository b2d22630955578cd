// boxpose command-line front end: generate / detect / evaluate / roundtrip /
// bench. Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "boxpose/pipeline.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

boxpose::PipelineConfig load_config_or_exit(const std::string& path) {
  return boxpose::load_pipeline_config(path);
}

void print_evaluation(const boxpose::EvaluateResult& res) {
  for (const auto& oe : res.objects) {
    if (oe.errors.empty()) {
      std::printf("object=%s no cases\n", oe.name.c_str());
      continue;
    }
    std::printf("object=%s gt=%d matched=%d spurious=%d auc=%.6f acc2cm=%.6f\n",
                oe.name.c_str(), oe.ground_truth_count, oe.matched_count,
                oe.spurious_count, oe.curve.auc, oe.accuracy_2cm);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypoint-based 6-DoF object pose estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string in_dir, out_dir, out_file, est_file, gt_file, out_csv;
  int frames = 100;
  std::uint64_t seed_override = 0;
  bool have_seed = false;
  double noise_sigma = 0.0;
  int dropout = 0;

  auto* gen = app.add_subcommand("generate", "Write labeled synthetic frames");
  gen->add_option("--config", config_path, "pipeline config (JSON)")->required();
  gen->add_option("--frames", frames, "number of frames");
  auto* gen_seed = gen->add_option("--seed", seed_override, "override config seed");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* det = app.add_subcommand("detect", "Recover poses from tensor files");
  det->add_option("--config", config_path, "pipeline config (JSON)")->required();
  det->add_option("--in", in_dir, "directory of belief/fields tensors")->required();
  det->add_option("--out", out_file, "estimates output file")->required();

  auto* eva = app.add_subcommand("evaluate", "Score estimates against ground truth");
  eva->add_option("--config", config_path, "pipeline config (JSON)")->required();
  eva->add_option("--est", est_file, "estimates file")->required();
  eva->add_option("--gt", gt_file, "ground-truth manifest")->required();
  eva->add_option("--out-csv", out_csv, "accuracy-threshold curve CSV");

  auto* rt = app.add_subcommand("roundtrip", "generate -> detect -> evaluate in-process");
  rt->add_option("--config", config_path, "pipeline config (JSON)")->required();
  rt->add_option("--frames", frames, "number of frames");
  auto* rt_seed = rt->add_option("--seed", seed_override, "override config seed");
  rt->add_option("--noise-sigma", noise_sigma, "belief noise std-dev");
  rt->add_option("--dropout", dropout, "vertex channels to zero (0-8)");

  auto* ben = app.add_subcommand("bench", "Time the post-processing stages");
  ben->add_option("--config", config_path, "pipeline config (JSON)")->required();
  ben->add_option("--frames", frames, "number of frames");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  have_seed = gen_seed->count() > 0 || rt_seed->count() > 0;

  try {
    boxpose::PipelineConfig cfg = load_config_or_exit(config_path);
    if (have_seed) cfg.seed = seed_override;

    if (gen->parsed()) {
      if (frames < 0) {
        std::fprintf(stderr, "error: --frames must be >= 0\n");
        return kExitUsage;
      }
      const auto res = boxpose::cmd_generate(cfg, frames, out_dir);
      std::printf("wrote %d frame(s) and %s\n", res.frames_written,
                  res.manifest_path.string().c_str());
    } else if (det->parsed()) {
      const auto res = boxpose::cmd_detect(cfg, in_dir, out_file);
      for (const auto& e : res.frame_errors)
        std::fprintf(stderr, "warning: %s\n", e.c_str());
      std::printf("wrote %zu estimate row(s) to %s\n", res.rows.size(),
                  out_file.c_str());
    } else if (eva->parsed()) {
      const auto res = boxpose::cmd_evaluate(cfg, est_file, gt_file, out_csv);
      print_evaluation(res);
    } else if (rt->parsed()) {
      const auto res = boxpose::cmd_roundtrip(cfg, frames, noise_sigma, dropout);
      std::printf("%s ms_per_frame=%.3f\n", res.summary_without_timing().c_str(),
                  res.ms_per_frame);
    } else if (ben->parsed()) {
      const auto res = boxpose::cmd_bench(cfg, frames);
      std::fputs(res.table().c_str(), stdout);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
