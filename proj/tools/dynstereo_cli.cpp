// Command-line front end: corpus and clip runs, synthetic clip generation,
// evaluation, statistics and PLY export.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dynstereo/config.hpp"
#include "dynstereo/metrics.hpp"
#include "dynstereo/pipeline.hpp"
#include "dynstereo/ply.hpp"
#include "dynstereo/synth.hpp"
#include "dynstereo/track_io.hpp"

namespace fs = std::filesystem;
using namespace dynstereo;

namespace {

struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  int threads = 0;
  double lr = -1, lambda_reg = -1, m0 = -1, max_depth_m = -1, grad_threshold = -1, trim_frac = -1;
  int steps = -1, trail_window = -1;
  std::string window_set;
};

void add_config_options(CLI::App* app, ConfigArgs& a) {
  app->add_option("--config", a.config_file, "TOML-like config file")->check(CLI::ExistingFile);
  app->add_option("--set", a.overrides, "Override as section.key=value (repeatable)");
  app->add_option("--threads", a.threads, "Worker count (default: DYNSTEREO_THREADS or cores)");
  app->add_option("--lr", a.lr, "Adam learning rate");
  app->add_option("--steps", a.steps, "Adam steps per track");
  app->add_option("--lambda-reg", a.lambda_reg, "Inverse-depth regularization weight");
  app->add_option("--m0", a.m0, "Motion gate center, px");
  app->add_option("--window-set", a.window_set, "Laplacian windows, e.g. 1,3,5");
  app->add_option("--trail-window", a.trail_window, "Trail window, frames");
  app->add_option("--max-depth-m", a.max_depth_m, "Depth cutoff, m");
  app->add_option("--grad-threshold", a.grad_threshold, "Relative depth-gradient cutoff");
  app->add_option("--trim-frac", a.trim_frac, "Fraction trimmed at each video end");
}

PipelineConfig build_config(const ConfigArgs& a) {
  PipelineConfig cfg = default_config();
  if (!a.config_file.empty()) apply_config_file(cfg, a.config_file);
  for (const std::string& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value: " + o);
    set_config_value(cfg, o.substr(0, eq), o.substr(eq + 1));
  }
  if (a.threads > 0) cfg.threads = a.threads;
  if (a.lr >= 0) cfg.optimizer.lr = a.lr;
  if (a.steps >= 0) cfg.optimizer.steps = a.steps;
  if (a.lambda_reg >= 0) cfg.optimizer.lambda_reg = a.lambda_reg;
  if (a.m0 >= 0) cfg.optimizer.m0 = a.m0;
  if (a.trail_window >= 0) cfg.optimizer.trail_window = a.trail_window;
  if (!a.window_set.empty()) set_config_value(cfg, "trackopt.windows", a.window_set);
  if (a.max_depth_m >= 0) cfg.depth.max_depth_m = a.max_depth_m;
  if (a.grad_threshold >= 0) cfg.depth.grad_threshold = a.grad_threshold;
  if (a.trim_frac >= 0) cfg.filters.trim_frac = a.trim_frac;
  cfg.validate();
  return cfg;
}

void print_status(const ClipRunStatus& s) {
  if (s.ok) {
    std::cout << s.clip_id << ": " << (s.accepted ? "accepted" : "rejected");
    for (const auto& r : s.reasons) std::cout << ' ' << r;
    std::cout << '\n';
  } else {
    std::cout << s.clip_id << ": FAILED at " << s.failed_stage << " (" << s.message << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynstereo: stereo-video 3D track extraction pipeline"};
  app.require_subcommand(1);

  // run
  ConfigArgs run_args;
  std::string corpus, run_out;
  auto* run = app.add_subcommand("run", "Process every clip below a corpus directory");
  run->add_option("--corpus", corpus, "Corpus directory or a single manifest")->required();
  run->add_option("--out", run_out, "Output root")->required();
  add_config_options(run, run_args);

  // run-clip
  ConfigArgs clip_args;
  std::string manifest, clip_out;
  auto* run_clip_cmd = app.add_subcommand("run-clip", "Process one clip");
  run_clip_cmd->add_option("--manifest", manifest, "Clip manifest.json")->required()->check(CLI::ExistingFile);
  run_clip_cmd->add_option("--out", clip_out, "Output root")->required();
  add_config_options(run_clip_cmd, clip_args);

  // synth
  std::string spec_file, synth_out, clip_id = "synth_clip";
  StandardSceneOptions so;
  int requery = 0;
  bool dump_spec = false;
  auto* synth = app.add_subcommand("synth", "Render a synthetic clip with ground truth");
  synth->add_option("--spec", spec_file, "SceneSpec JSON (overrides the standard scene)")->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output clip directory")->required();
  synth->add_option("--clip-id", clip_id, "Clip id written to the manifest");
  synth->add_option("--static-points", so.static_points, "Static points in the standard scene");
  synth->add_option("--moving-points", so.moving_points, "Moving points in the standard scene");
  synth->add_option("--frames", so.frames, "Frame count");
  synth->add_option("--size", so.image_size, "Square image size, px");
  synth->add_option("--seed", so.seed, "Noise and scene seed");
  synth->add_option("--disparity-std", so.disparity_std_px, "Disparity noise std, px");
  synth->add_option("--track-std", so.track_std_px, "Track noise std, px");
  synth->add_option("--requery", requery, "Re-query interval in frames (0: off)");
  synth->add_flag("--dump-spec", dump_spec, "Also write scene.json");

  // eval
  std::string pred_file, truth_file, lifted_file, truth_dir;
  int frame_a = 0, frame_b = 1;
  auto* eval = app.add_subcommand("eval", "Scene-flow metrics and denoising report");
  eval->add_option("--pred", pred_file, "Predicted tracks3d.trk")->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", truth_file, "Ground-truth track table")->check(CLI::ExistingFile);
  eval->add_option("--frame-a", frame_a, "First frame of the motion pair");
  eval->add_option("--frame-b", frame_b, "Second frame of the motion pair");
  eval->add_option("--lifted", lifted_file, "Pre-optimization tracks for the denoising report")
      ->check(CLI::ExistingFile);
  eval->add_option("--truth-dir", truth_dir, "Synthetic clip directory holding truth files")
      ->check(CLI::ExistingDirectory);

  // stats
  std::string stats_tracks;
  auto* stats = app.add_subcommand("stats", "Visibility statistics of a track table");
  stats->add_option("--tracks", stats_tracks, "tracks3d.trk")->required()->check(CLI::ExistingFile);

  // export-ply
  std::string ply_tracks, ply_out;
  int ply_frame = 0;
  bool trajectories = false, color = false;
  auto* ply = app.add_subcommand("export-ply", "Write a PLY point cloud or trajectory set");
  ply->add_option("--tracks", ply_tracks, "tracks3d.trk")->required()->check(CLI::ExistingFile);
  ply->add_option("--out", ply_out, "Output .ply")->required();
  ply->add_option("--frame", ply_frame, "Frame to export");
  ply->add_flag("--trajectories", trajectories, "Write polylines instead of one frame");
  ply->add_flag("--color", color, "Add per-track colors");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const PipelineConfig cfg = build_config(run_args);
      const auto manifests = discover_manifests(corpus);
      const CorpusReport rep = run_corpus(manifests, cfg, run_out);
      for (const auto& s : rep.clips) print_status(s);
      std::cout << rep.ok << " ok, " << rep.rejected << " rejected, " << rep.failed << " failed\n";
      return 0;
    }
    if (*run_clip_cmd) {
      const PipelineConfig cfg = build_config(clip_args);
      const ClipRunStatus s = run_clip(manifest, cfg, clip_out);
      print_status(s);
      return s.ok ? 0 : 2;
    }
    if (*synth) {
      SceneSpec spec;
      if (!spec_file.empty()) {
        std::ifstream is(spec_file);
        spec = scene_from_json(nlohmann::json::parse(is));
      } else {
        spec = standard_scene(so);
        spec.requery_every = requery;
      }
      const GroundTruthBundle bundle = render_scene(spec);
      const fs::path m = write_bundle(bundle, synth_out, clip_id);
      if (dump_spec) std::ofstream(fs::path(synth_out) / "scene.json") << scene_to_json(spec).dump(2) << '\n';
      std::cout << m.string() << '\n';
      return 0;
    }
    if (*eval) {
      nlohmann::json out;
      const auto pred = read_tracks3d(pred_file);
      if (!truth_file.empty()) {
        const auto truth = read_tracks3d(truth_file);
        out["scene_flow"] = eval_metrics(pred, truth, frame_a, frame_b).to_json();
      }
      if (!lifted_file.empty()) {
        if (truth_dir.empty()) throw std::invalid_argument("--lifted needs --truth-dir");
        auto lifted = read_tracks3d(lifted_file);
        auto optimized = pred;
        const auto poses = load_poses(fs::path(truth_dir) / "poses.json");
        for (auto& t : lifted) attach_cameras(t, poses);
        for (auto& t : optimized) attach_cameras(t, poses);
        out["denoising"] = evaluate_denoising(read_truth(truth_dir), lifted, optimized).to_json();
      }
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (*stats) {
      const auto tracks = read_tracks3d(stats_tracks);
      const TrackVisibilityStats s = track_visibility_stats(tracks);
      std::cout << nlohmann::json{{"track_count", s.track_count},
                                  {"visible_points", s.visible_points},
                                  {"mean_visible_length", s.mean_visible_length},
                                  {"per_frame_density", s.per_frame_density}}
                       .dump(2)
                << '\n';
      return 0;
    }
    if (*ply) {
      const auto tracks = read_tracks3d(ply_tracks);
      const PlyOptions opts{color, true, {}};
      const std::size_t n = trajectories ? export_trajectories(tracks, ply_out, opts)
                                         : export_pointcloud(tracks, ply_frame, ply_out, opts);
      std::cout << n << " vertices written to " << ply_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
