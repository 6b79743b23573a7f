#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "dynstereo/depth.hpp"
#include "dynstereo/rng.hpp"
#include "dynstereo/synth.hpp"
#include "dynstereo/track_io.hpp"
#include "oracles.hpp"

using namespace dynstereo;

namespace {

std::vector<Track3D> lift_variant(const GroundTruthBundle& b, std::size_t v) {
  const RenderedVariant& rv = b.variants[v];
  std::vector<DepthMap> depths;
  for (const auto& d : rv.disparity) {
    depths.push_back(depth_from_disparity(d, b.rig.baseline_m, rv.model.focal));
  }
  std::vector<Track3D> out;
  for (const auto& t : rv.tracks) out.push_back(lift_track(t, b.poses, depths, rv.model));
  return out;
}

double max_lift_error(const GroundTruthBundle& b, std::size_t* checked) {
  double worst = 0.0;
  for (std::size_t v = 0; v < b.variants.size(); ++v) {
    for (const Track3D& t : lift_variant(b, v)) {
      const auto& traj = b.trajectories[static_cast<std::size_t>(b.point_of_track.at(t.track_id))];
      for (int i = 0; i < t.num_frames(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (!t.visible[ui]) continue;
        worst = std::max(worst, (t.points[ui] - traj[ui]).norm());
        ++*checked;
      }
    }
  }
  return worst;
}

SceneSpec noiseless(MotionKind kind, bool moving_camera) {
  StandardSceneOptions o;
  o.static_points = 15;
  o.moving_points = 15;
  o.moving_kind = kind;
  o.frames = 40;
  o.image_size = 256;
  o.disparity_std_px = 0.0;
  o.track_std_px = 0.0;
  o.moving_camera = moving_camera;
  o.seed = 11;
  return standard_scene(o);
}

// Depth error std of a single point straight ahead over many frames.
double depth_error_std(double disparity_std, double z) {
  SceneSpec s;
  s.static_points = {Vec3(0, 0, z)};
  s.frames = 1000;
  s.image_width = s.image_height = 512;
  s.variants = {{"f1000", 60.0, 1000.0}};
  s.noise = {disparity_std, 0.0, 99};
  const GroundTruthBundle b = render_scene(s);
  const auto& rv = b.variants[0];
  std::vector<double> err;
  for (const auto& d : rv.disparity) {
    const DepthMap dm = disparity_to_depth(d, 0.063, 1000.0);
    err.push_back(*sample_depth(dm, Vec2(256.0, 256.0)) - z);
  }
  const double mean = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
  double var = 0.0;
  for (double e : err) var += (e - mean) * (e - mean);
  return std::sqrt(var / static_cast<double>(err.size() - 1));
}

}  // namespace

TEST(CounterRng, PinnedAlgorithm) {
  // SplitMix64 finalizer of the golden-ratio increment.
  EXPECT_EQ(CounterRng::mix(0), 0xE220A8397B1DCDAFull);
  const CounterRng a(5), b(5), c(6);
  EXPECT_EQ(a.bits(17), b.bits(17));
  EXPECT_NE(a.bits(17), c.bits(17));
  EXPECT_NE(a.substream(1).bits(0), a.substream(2).bits(0));
}

TEST(CounterRng, NormalMoments) {
  const CounterRng r(3);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = r.normal(static_cast<std::uint64_t>(k));
    s += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
  EXPECT_NEAR(s4 / n, 3.0, 0.1);
  for (int k = 0; k < 1000; ++k) {
    const double u = r.uniform(static_cast<std::uint64_t>(k));
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RenderScene, SameSeedIsBitIdentical) {
  StandardSceneOptions o;
  o.static_points = 10;
  o.moving_points = 5;
  o.frames = 20;
  o.image_size = 128;
  const GroundTruthBundle a = render_scene(standard_scene(o));
  const GroundTruthBundle b = render_scene(standard_scene(o));
  ASSERT_EQ(a.variants.size(), b.variants.size());
  for (std::size_t v = 0; v < a.variants.size(); ++v) {
    for (std::size_t i = 0; i < a.variants[v].disparity.size(); ++i) {
      const auto& x = a.variants[v].disparity[i].disparity.data();
      const auto& y = b.variants[v].disparity[i].disparity.data();
      ASSERT_EQ(x.size(), y.size());
      ASSERT_EQ(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)), 0);
    }
    ASSERT_EQ(a.variants[v].tracks.size(), b.variants[v].tracks.size());
    for (std::size_t k = 0; k < a.variants[v].tracks.size(); ++k) {
      const auto& p = a.variants[v].tracks[k].positions;
      const auto& q = b.variants[v].tracks[k].positions;
      ASSERT_EQ(std::memcmp(p.data(), q.data(), p.size() * sizeof(Vec2)), 0);
    }
  }
  o.seed = 2;
  const GroundTruthBundle c = render_scene(standard_scene(o));
  EXPECT_NE(a.trajectories[0][0], c.trajectories[0][0]);
}

TEST(RenderScene, NoiselessLiftReproducesTruthForAllMotions) {
  for (MotionKind kind : {MotionKind::kLinear, MotionKind::kSinusoid, MotionKind::kPiecewise}) {
    for (bool moving_camera : {false, true}) {
      const GroundTruthBundle b = render_scene(noiseless(kind, moving_camera));
      std::size_t checked = 0;
      EXPECT_LT(max_lift_error(b, &checked), 1e-6);
      EXPECT_GT(checked, 500u);
    }
  }
}

TEST(RenderScene, NoiselessLiftWithPitchedAndYawingCamera) {
  SceneSpec s = noiseless(MotionKind::kSinusoid, true);
  s.camera.pitch_deg = 4.0;
  s.camera.yaw_deg = -3.0;
  s.camera.yaw_rate_deg_per_s = -6.0;
  s.camera.start = Vec3(0.2, -0.1, 0.0);
  const GroundTruthBundle b = render_scene(s);
  std::size_t checked = 0;
  EXPECT_LT(max_lift_error(b, &checked), 1e-6);
  EXPECT_GT(checked, 500u);
}

TEST(RenderScene, DepthErrorMatchesFirstOrderPropagation) {
  const double predicted = 0.5 * 2.0 * 2.0 / (0.063 * 1000.0);
  EXPECT_NEAR(predicted, 0.0317, 1e-4);
  const double measured = depth_error_std(0.5, 2.0);
  EXPECT_GT(measured, 0.8 * predicted);
  EXPECT_LT(measured, 1.2 * predicted);
}

TEST(RenderScene, DoublingDisparityNoiseDoublesDepthError) {
  const double ratio = depth_error_std(1.0, 3.0) / depth_error_std(0.5, 3.0);
  EXPECT_NEAR(ratio, 2.0, 0.5);
}

TEST(RenderScene, PointsBehindCameraAreInvisible) {
  SceneSpec s;
  s.frames = 10;
  s.image_width = s.image_height = 128;
  MovingPoint p;
  p.start = Vec3(0, 0, 0.5);
  p.velocity = Vec3(0, 0, -3.0);  // passes behind the camera after ~5 frames
  s.moving_points = {p};
  const GroundTruthBundle b = render_scene(s);
  const Track2D& t = b.variants[0].tracks.at(0);
  EXPECT_TRUE(t.visible[0]);
  EXPECT_FALSE(t.visible[9]);
}

TEST(RenderScene, NarrowVariantHasLowerIds) {
  StandardSceneOptions o;
  o.static_points = 6;
  o.frames = 10;
  o.image_size = 128;
  const GroundTruthBundle b = render_scene(standard_scene(o));
  ASSERT_EQ(b.variants.size(), 2u);
  ASSERT_FALSE(b.variants[1].tracks.empty());
  EXPECT_LT(b.variants[0].tracks.back().track_id, b.variants[1].tracks.front().track_id);
}

TEST(RenderScene, RequeriedDuplicatesCollapseUnderDedup) {
  SceneSpec s = noiseless(MotionKind::kLinear, true);
  const std::size_t base = render_scene(s).variants[0].tracks.size();
  s.requery_every = 10;
  const GroundTruthBundle b = render_scene(s);
  EXPECT_GT(b.variants[0].tracks.size(), base);
  EXPECT_EQ(dedup_queries(b.variants[0].tracks, 1.0).size(), base);
}

TEST(RenderScene, ValidatesSpec) {
  SceneSpec s;
  s.frames = 1;
  EXPECT_THROW(render_scene(s), std::invalid_argument);
  s = {};
  s.noise.track_std_px = -1.0;
  EXPECT_THROW(render_scene(s), std::invalid_argument);
}

TEST(SceneJson, RoundTrip) {
  StandardSceneOptions o;
  o.static_points = 3;
  o.moving_points = 3;
  o.moving_kind = MotionKind::kPiecewise;
  const SceneSpec s = standard_scene(o);
  const nlohmann::json j = scene_to_json(s);
  EXPECT_EQ(scene_to_json(scene_from_json(j)), j);
  o.moving_kind = MotionKind::kSinusoid;
  const nlohmann::json k = scene_to_json(standard_scene(o));
  EXPECT_EQ(scene_to_json(scene_from_json(k)), k);
}

TEST(Denoising, TrivialCasesAndMismatch) {
  StandardSceneOptions o;
  o.static_points = 10;
  o.moving_points = 10;
  o.frames = 30;
  o.image_size = 256;
  const GroundTruthBundle b = render_scene(standard_scene(o));
  const auto lifted = lift_variant(b, 0);
  std::vector<Track3D> truth;
  for (const Track3D& t : lifted) {
    Track3D g = t;
    const auto& traj = b.trajectories[static_cast<std::size_t>(b.point_of_track.at(t.track_id))];
    for (int i = 0; i < t.num_frames(); ++i) {
      if (t.visible[static_cast<std::size_t>(i)]) g.points[static_cast<std::size_t>(i)] = traj[static_cast<std::size_t>(i)];
    }
    truth.push_back(g);
  }
  const DenoiseReport exact = evaluate_denoising(b, lifted, truth);
  EXPECT_GT(exact.static_tracks, 0u);
  EXPECT_GT(exact.dynamic_tracks, 0u);
  for (const auto& r : exact.records) EXPECT_LT(r.rmse_post, 1e-12);

  const DenoiseReport noop = evaluate_denoising(b, lifted, lifted);
  for (const auto& r : noop.records) {
    EXPECT_EQ(r.rmse_pre, r.rmse_post);
    EXPECT_EQ(r.std_pre, r.std_post);
    EXPECT_EQ(r.accel_pre, r.accel_post);
  }
  EXPECT_DOUBLE_EQ(noop.static_jitter_ratio, 1.0);

  auto wrong = lifted;
  wrong.front().track_id = 999999;
  EXPECT_THROW(evaluate_denoising(b, lifted, wrong), std::invalid_argument);
  EXPECT_THROW(evaluate_denoising(b, lifted, std::span(lifted).first(1)), std::invalid_argument);
  EXPECT_NO_THROW(exact.to_json().dump());
}

TEST(Bundle, WrittenFilesRoundTripTruth) {
  StandardSceneOptions o;
  o.static_points = 5;
  o.moving_points = 5;
  o.frames = 12;
  o.image_size = 128;
  const GroundTruthBundle b = render_scene(standard_scene(o));
  const auto dir = oracle::fresh_dir("synth_bundle");
  const auto manifest = write_bundle(b, dir, "clip0");
  EXPECT_TRUE(std::filesystem::exists(manifest));
  const TruthTable from_disk = read_truth(dir);
  const TruthTable direct = truth_table(b);
  ASSERT_EQ(from_disk.size(), direct.size());
  for (const auto& [id, t] : direct) {
    const TruthTrack& d = from_disk.at(id);
    EXPECT_EQ(d.is_static, t.is_static);
    EXPECT_EQ(d.point, t.point);
    ASSERT_EQ(d.trajectory.size(), t.trajectory.size());
    for (std::size_t i = 0; i < t.trajectory.size(); ++i) {
      // Truth points are stored as float32.
      EXPECT_LT((d.trajectory[i] - t.trajectory[i]).norm(), 1e-5);
    }
  }
  const auto tracks = read_tracks2d(dir / "tracks_fov60.trk");
  EXPECT_EQ(tracks.size(), b.variants[0].tracks.size());
}
