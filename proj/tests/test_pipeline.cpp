#include <fstream>

#include <gtest/gtest.h>

#include "dynstereo/grid_io.hpp"
#include "dynstereo/pipeline.hpp"
#include "dynstereo/track_io.hpp"
#include "oracles.hpp"

using namespace dynstereo;
namespace fs = std::filesystem;

namespace {

StandardSceneOptions small_scene(std::uint64_t seed = 1) {
  StandardSceneOptions o;
  o.static_points = 30;
  o.moving_points = 10;
  o.frames = 40;
  o.image_size = 256;
  o.seed = seed;
  return o;
}

PipelineConfig quiet_config(int threads = 1) {
  PipelineConfig c;
  c.threads = threads;
  return c;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(oracle::read_file(p)); }

std::vector<Track3D> read_with_cameras(const fs::path& p, const std::vector<CameraPose>& poses) {
  auto tracks = read_tracks3d(p);
  for (auto& t : tracks) attach_cameras(t, poses);
  return tracks;
}

}  // namespace

TEST(Pipeline, FileBasedSyntheticClipMeetsDenoisingTargets) {
  StandardSceneOptions o;
  o.static_points = 60;
  o.moving_points = 20;
  o.frames = 60;
  const GroundTruthBundle b = render_scene(standard_scene(o));
  const fs::path in = oracle::fresh_dir("pipe_e2e_in");
  const fs::path out = oracle::fresh_dir("pipe_e2e_out");
  const fs::path manifest = write_bundle(b, in, "clipA");

  const ClipRunStatus st = run_clip(manifest, quiet_config(), out);
  ASSERT_TRUE(st.ok) << st.message;
  EXPECT_TRUE(st.accepted);
  const auto lifted = read_with_cameras(out / "clipA" / "tracks3d_lifted.trk", b.poses);
  const auto optimized = read_with_cameras(out / "clipA" / "tracks3d.trk", b.poses);
  const DenoiseReport rep = evaluate_denoising(read_truth(in), lifted, optimized);
  EXPECT_GE(rep.static_tracks, 50u);
  EXPECT_GE(rep.static_jitter_ratio, 5.0);
  EXPECT_GT(rep.dynamic_tracks, 0u);
  EXPECT_GE(rep.dynamic_fraction_rmse_improved, 0.95);
  EXPECT_EQ(rep.dynamic_fraction_accel_improved, 1.0);

  for (const char* f : {"verdict.json", "stats.json", "motion.csv", "stage_log.txt"}) {
    EXPECT_TRUE(fs::exists(out / "clipA" / f)) << f;
  }
  const auto stats = read_json(out / "clipA" / "stats.json");
  EXPECT_EQ(stats["after_filter"].get<std::size_t>(), optimized.size());
  EXPECT_GT(stats["camera_displacement_m"].get<double>(), 0.1);
}

TEST(Pipeline, StageOrderIsFixedAndLogged) {
  const GroundTruthBundle b = render_scene(standard_scene(small_scene()));
  const ClipResult r = process_clip(clip_input_from_bundle(b, "c"), quiet_config());
  std::vector<std::string> want(kStageOrder.begin(), kStageOrder.end() - 1);
  EXPECT_EQ(r.stage_log, want);

  const fs::path out = oracle::fresh_dir("pipe_stage_log");
  export_clip(r, out, quiet_config());
  std::string expected;
  for (auto s : kStageOrder) expected += std::string(s) + '\n';
  EXPECT_EQ(oracle::read_file(out / "stage_log.txt"), expected);
}

TEST(Pipeline, DedupKeepsNarrowTrackOfEachPoint) {
  StandardSceneOptions o = small_scene();
  o.track_std_px = 0.0;
  const GroundTruthBundle b = render_scene(standard_scene(o));
  const ClipResult r = process_clip(clip_input_from_bundle(b, "c"), quiet_config());
  EXPECT_EQ(r.input_tracks, b.variants[0].tracks.size() + b.variants[1].tracks.size());
  EXPECT_LT(r.after_dedup, r.input_tracks);
  // Points seen by the narrow variant from frame 0 keep its (lower) id.
  std::set<int> points;
  for (const Track3D& t : r.tracks) {
    EXPECT_TRUE(points.insert(b.point_of_track.at(t.track_id)).second)
        << "point tracked twice: " << b.point_of_track.at(t.track_id);
  }
}

TEST(Pipeline, MissingDisparityFailsInDepthStage) {
  const GroundTruthBundle b = render_scene(standard_scene(small_scene()));
  const fs::path in = oracle::fresh_dir("pipe_missing_in");
  const fs::path manifest = write_bundle(b, in, "broken");
  fs::remove(in / "disparity_fov60" / frame_file_name(7));
  const ClipRunStatus st = run_clip(manifest, quiet_config(), oracle::fresh_dir("pipe_missing_out"));
  EXPECT_FALSE(st.ok);
  EXPECT_EQ(st.failed_stage, "depth");
  EXPECT_NE(st.message.find(frame_file_name(7)), std::string::npos) << st.message;
}

TEST(Pipeline, BadManifestFailsInLoadStage) {
  const fs::path in = oracle::fresh_dir("pipe_bad_manifest");
  std::ofstream(in / "manifest.json") << "{ not json";
  const ClipRunStatus st = run_clip(in / "manifest.json", quiet_config(), oracle::fresh_dir("pipe_bad_out"));
  EXPECT_FALSE(st.ok);
  EXPECT_EQ(st.failed_stage, "load");
}

TEST(Pipeline, RerunsAndThreadCountsAreBitIdentical) {
  const GroundTruthBundle b = render_scene(standard_scene(small_scene(4)));
  const fs::path in = oracle::fresh_dir("pipe_det_in");
  const fs::path manifest = write_bundle(b, in, "det");
  PipelineConfig cfg = quiet_config(1);
  cfg.export_loss_traces = true;
  cfg.export_ply_frame = 5;
  cfg.export_trajectories_ply = true;
  const fs::path a = oracle::fresh_dir("pipe_det_a");
  const fs::path c = oracle::fresh_dir("pipe_det_b");
  const fs::path d = oracle::fresh_dir("pipe_det_c");
  ASSERT_TRUE(run_clip(manifest, cfg, a).ok);
  ASSERT_TRUE(run_clip(manifest, cfg, c).ok);
  cfg.threads = 3;
  ASSERT_TRUE(run_clip(manifest, cfg, d).ok);
  std::string diff;
  EXPECT_TRUE(oracle::same_tree(a, c, &diff)) << diff;
  EXPECT_TRUE(oracle::same_tree(a, d, &diff)) << diff;
  EXPECT_TRUE(fs::exists(a / "det" / "pointcloud.ply"));
  EXPECT_TRUE(fs::exists(a / "det" / "trajectories.ply"));
  EXPECT_TRUE(fs::exists(a / "det" / "loss_traces.csv"));
}

TEST(Pipeline, FlowInputMatchesDisparityInput) {
  const GroundTruthBundle b = render_scene(standard_scene(small_scene(5)));
  const fs::path in = oracle::fresh_dir("pipe_flow_in");
  const fs::path manifest = write_bundle(b, in, "flowclip");
  const fs::path out_disp = oracle::fresh_dir("pipe_flow_disp");
  ASSERT_TRUE(run_clip(manifest, quiet_config(), out_disp).ok);

  ClipManifest m = load_manifest(manifest);
  for (VariantManifest& v : m.variants) {
    const fs::path flow_dir = in / ("flow_" + v.name);
    fs::create_directories(flow_dir);
    for (int i = 0; i < m.frame_count; ++i) {
      const DisparityMap d = read_disparity(m.resolve(v.disparity_dir) / frame_file_name(i));
      StereoFlowField f;
      f.frame_index = i;
      f.flow_x = ImageGrid(d.width(), d.height(), std::numeric_limits<double>::quiet_NaN());
      f.flow_y = ImageGrid(d.width(), d.height(), 0.0);
      f.cycle_error = ImageGrid(d.width(), d.height(), 0.0);
      for (std::size_t k = 0; k < d.disparity.size(); ++k) {
        if (d.valid.data()[k]) f.flow_x.data()[k] = d.disparity.data()[k];
      }
      // Pixels that break a stereo check never carry a valid disparity.
      f.flow_y(0, 0) = 3.0;
      write_flow(flow_dir / frame_file_name(i), f);
    }
    v.flow_dir = flow_dir;
    v.disparity_dir.clear();
  }
  save_manifest(m, manifest);
  const fs::path out_flow = oracle::fresh_dir("pipe_flow_flow");
  const ClipRunStatus st = run_clip(manifest, quiet_config(), out_flow);
  ASSERT_TRUE(st.ok) << st.message;
  EXPECT_EQ(oracle::read_file(out_disp / "flowclip" / "tracks3d.trk"),
            oracle::read_file(out_flow / "flowclip" / "tracks3d.trk"));
}

TEST(Pipeline, StaticCameraStillSceneIsRejected) {
  StandardSceneOptions o = small_scene();
  o.moving_points = 0;
  o.moving_camera = false;
  o.track_std_px = 0.0;
  const GroundTruthBundle b = render_scene(standard_scene(o));
  const fs::path in = oracle::fresh_dir("pipe_still_in");
  const fs::path out = oracle::fresh_dir("pipe_still_out");
  const ClipRunStatus st = run_clip(write_bundle(b, in, "still"), quiet_config(), out);
  ASSERT_TRUE(st.ok) << st.message;
  EXPECT_FALSE(st.accepted);
  EXPECT_EQ(st.reasons, (std::vector<std::string>{"static_image"}));
  EXPECT_FALSE(fs::exists(out / "still" / "tracks3d.trk"));
  const auto verdict = read_json(out / "still" / "verdict.json");
  EXPECT_FALSE(verdict["accepted"].get<bool>());
  EXPECT_TRUE(verdict["camera_static"].get<bool>());
}

TEST(Pipeline, BoundaryTrimRejectsClipsAtSourceEnds) {
  const GroundTruthBundle b = render_scene(standard_scene(small_scene()));
  ClipInput in = clip_input_from_bundle(b, "trim");
  in.source_frame_count = 1000;
  in.frame_start = 0;
  EXPECT_EQ(process_clip(in, quiet_config()).verdict.reasons,
            (std::vector<RejectReason>{RejectReason::kBoundaryTrim}));
  in.frame_start = 500;
  EXPECT_TRUE(process_clip(in, quiet_config()).verdict.accepted);
  in.frame_start = 1000 - 40;
  EXPECT_FALSE(process_clip(in, quiet_config()).verdict.accepted);
}

TEST(Pipeline, CrossFadeNeedsStaticCamera) {
  StandardSceneOptions o = small_scene();
  o.moving_camera = false;
  const GroundTruthBundle still = render_scene(standard_scene(o));
  ClipInput in = clip_input_from_bundle(still, "fade");
  in.match_counts = MatchCountSeries{150, {{0, 150, 2}}};
  const ClipResult r = process_clip(in, quiet_config());
  EXPECT_TRUE(r.camera_static);
  EXPECT_EQ(r.verdict.reasons, (std::vector<RejectReason>{RejectReason::kCrossFade}));

  in.match_counts = MatchCountSeries{150, {{0, 150, 40}}};
  EXPECT_TRUE(process_clip(in, quiet_config()).verdict.accepted);

  const GroundTruthBundle moving = render_scene(standard_scene(small_scene()));
  ClipInput mv = clip_input_from_bundle(moving, "pan");
  mv.match_counts = MatchCountSeries{150, {{0, 150, 0}}};
  EXPECT_TRUE(process_clip(mv, quiet_config()).verdict.accepted);
}

TEST(Pipeline, BuiltinMatcherRunsOnFramesWhenNoCountsGiven) {
  StandardSceneOptions o = small_scene();
  o.moving_camera = false;
  o.frames = 40;
  const GroundTruthBundle b = render_scene(standard_scene(o));
  ClipInput in = clip_input_from_bundle(b, "frames");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  ImageGrid shot1(128, 128), shot2(128, 128);
  for (double& v : shot1.data()) v = u(rng);
  for (double& v : shot2.data()) v = u(rng);
  // 1 s gap at 30 fps; the picture changes completely half-way.
  PipelineConfig cfg = quiet_config();
  cfg.filters.cross_fade_gap_s = 1.0;
  in.frame_image = [&](int i) { return i < 20 ? shot1 : shot2; };
  EXPECT_EQ(process_clip(in, cfg).verdict.reasons, (std::vector<RejectReason>{RejectReason::kCrossFade}));
  in.frame_image = [&](int) { return shot1; };
  EXPECT_TRUE(process_clip(in, cfg).verdict.accepted);
}

TEST(Pipeline, SemanticLabelsDropMovingTracksOnBannedClasses) {
  const GroundTruthBundle b = render_scene(standard_scene(small_scene()));
  ClipInput in = clip_input_from_bundle(b, "labels");
  auto names = std::make_shared<const std::vector<std::string>>(std::vector<std::string>{"road"});
  for (VariantInput& v : in.variants) {
    for (int i = 0; i < in.frame_count; ++i) {
      LabelMap l;
      l.ids = Grid<std::int32_t>(v.model.width, v.model.height, 0);
      l.class_names = names;
      l.frame_index = i;
      v.labels.emplace(i, std::move(l));
    }
  }
  const ClipResult plain = process_clip(clip_input_from_bundle(b, "labels"), quiet_config());
  const ClipResult r = process_clip(in, quiet_config());
  std::size_t fast = 0;
  for (const auto& m : plain.motions) fast += m.m > 20.0;
  ASSERT_GT(fast, 0u);
  EXPECT_EQ(r.after_filter, plain.after_filter - fast);
  for (const auto& m : r.motions) EXPECT_LE(m.m, 20.0);
}

TEST(Pipeline, CorpusIsolatesFailingClips) {
  const fs::path root = oracle::fresh_dir("pipe_corpus_in");
  for (int k = 0; k < 3; ++k) {
    const GroundTruthBundle b = render_scene(standard_scene(small_scene(static_cast<std::uint64_t>(10 + k))));
    write_bundle(b, root / ("clip" + std::to_string(k)), "clip" + std::to_string(k));
  }
  fs::remove(root / "clip1" / "poses.json");
  const fs::path out = oracle::fresh_dir("pipe_corpus_out");
  PipelineConfig cfg = quiet_config(2);
  const auto manifests = discover_manifests(root);
  ASSERT_EQ(manifests.size(), 3u);
  const CorpusReport rep = run_corpus(manifests, cfg, out);
  EXPECT_EQ(rep.ok, 2u);
  EXPECT_EQ(rep.failed, 1u);
  const auto failures = read_json(out / "failures.json");
  ASSERT_EQ(failures.size(), 1u);
  EXPECT_EQ(failures[0]["clip_id"], "clip1");
  EXPECT_EQ(failures[0]["stage"], "load");
  EXPECT_TRUE(fs::exists(out / "clip0" / "tracks3d.trk"));
  EXPECT_TRUE(fs::exists(out / "clip2" / "tracks3d.trk"));
  EXPECT_EQ(read_json(out / "corpus_summary.json")["failed"].get<int>(), 1);
}

TEST(Pipeline, RejectedRerunRemovesStaleTrackFiles) {
  const GroundTruthBundle b = render_scene(standard_scene(small_scene()));
  ClipInput in = clip_input_from_bundle(b, "stale");
  const fs::path out = oracle::fresh_dir("pipe_stale");
  export_clip(process_clip(in, quiet_config()), out, quiet_config());
  ASSERT_TRUE(fs::exists(out / "tracks3d.trk"));
  in.source_frame_count = 41;
  export_clip(process_clip(in, quiet_config()), out, quiet_config());
  EXPECT_FALSE(fs::exists(out / "tracks3d.trk"));
  EXPECT_FALSE(fs::exists(out / "tracks3d_lifted.trk"));
}

TEST(Pipeline, PlyFrameOutsideClipFailsInExport) {
  const GroundTruthBundle b = render_scene(standard_scene(small_scene()));
  PipelineConfig cfg = quiet_config();
  cfg.export_ply_frame = 400;
  const ClipResult r = process_clip(clip_input_from_bundle(b, "ply"), cfg);
  try {
    export_clip(r, oracle::fresh_dir("pipe_ply"), cfg);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "export");
  }
}
