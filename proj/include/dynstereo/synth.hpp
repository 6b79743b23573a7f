#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynstereo/depth.hpp"
#include "dynstereo/geometry.hpp"
#include "dynstereo/tracks.hpp"

namespace dynstereo {

enum class MotionKind { kLinear, kSinusoid, kPiecewise };

/// Parametric trajectory of one moving point. Time t is in seconds.
///   linear:    start + velocity * t
///   sinusoid:  start + amplitude .* sin(2 pi frequency_hz t + phase)
///   piecewise: linear interpolation through waypoints at waypoint_times,
///              held constant outside the time span
struct MovingPoint {
  Vec3 start = Vec3::Zero();
  MotionKind kind = MotionKind::kLinear;
  Vec3 velocity = Vec3::Zero();
  Vec3 amplitude = Vec3::Zero();
  double frequency_hz = 0.0;
  Vec3 phase = Vec3::Zero();
  std::vector<Vec3> waypoints;
  std::vector<double> waypoint_times;

  [[nodiscard]] Vec3 position(double t) const;
};

/// Camera center start + velocity * t + sway .* sin(2 pi sway_frequency_hz t);
/// orientation is a yaw about the camera y axis followed by a fixed pitch.
struct CameraPath {
  Vec3 start = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 sway_amplitude = Vec3::Zero();
  double sway_frequency_hz = 0.0;
  double yaw_deg = 0.0;
  double yaw_rate_deg_per_s = 0.0;
  double pitch_deg = 0.0;

  [[nodiscard]] CameraPose pose_at(int frame, double fps) const;
};

struct NoiseSpec {
  double disparity_std_px = 0.0;
  double track_std_px = 0.0;
  std::uint64_t seed = 0;
};

/// One rendered camera variant. A perspective model of the given horizontal
/// FoV, or of the given focal length when focal_px > 0.
struct VariantSpec {
  std::string name;
  double fov_h_deg = 60.0;
  double focal_px = 0.0;
};

struct SceneSpec {
  std::vector<Vec3> static_points;
  std::vector<MovingPoint> moving_points;
  CameraPath camera;
  int frames = 150;
  double fps = 30.0;
  NoiseSpec noise;
  int image_width = 512;
  int image_height = 512;
  std::vector<VariantSpec> variants{{"fov60", 60.0, 0.0}, {"fov120", 120.0, 0.0}};
  RigCalibration rig;
  /// Half-size of the constant-disparity square written around each point.
  int patch_radius = 3;
  /// When > 0, every point is re-queried this many frames after its first
  /// query while it stays visible, producing duplicate tracks.
  int requery_every = 0;

  void validate() const;
  [[nodiscard]] std::size_t point_count() const {
    return static_points.size() + moving_points.size();
  }
};

nlohmann::json scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const nlohmann::json& j);

struct RenderedVariant {
  std::string name;
  CameraModel model;
  std::vector<DisparityMap> disparity;
  std::vector<Track2D> tracks;
};

struct GroundTruthBundle {
  std::vector<CameraPose> poses;
  RigCalibration rig;
  double fps = 30.0;
  /// trajectories[j][i]: true world position of point j at frame i. Static
  /// points come first.
  std::vector<std::vector<Vec3>> trajectories;
  std::vector<std::uint8_t> point_is_static;
  std::vector<RenderedVariant> variants;
  /// Scene point behind every rendered track id.
  std::map<std::uint32_t, int> point_of_track;

  [[nodiscard]] int frame_count() const { return static_cast<int>(poses.size()); }
  /// Model of the first variant.
  [[nodiscard]] const CameraModel& model() const { return variants.front().model; }
  /// True trajectory of a track as a Track3D, visible where the track is.
  [[nodiscard]] Track3D truth_track(const Track2D& track) const;
};

/// Track ids are assigned sequentially by (variant, point, query), so the
/// narrow variant's track of a point always has the lower id.
GroundTruthBundle render_scene(const SceneSpec& spec);

/// Options for the acceptance scenes: points at 1-5 m inside the narrow
/// FoV at frame 0, standard noise, slowly moving camera.
struct StandardSceneOptions {
  int static_points = 60;
  int moving_points = 0;
  MotionKind moving_kind = MotionKind::kSinusoid;
  int frames = 150;
  double fps = 30.0;
  int image_size = 512;
  double disparity_std_px = 0.5;
  double track_std_px = 0.25;
  std::uint64_t seed = 1;
  double min_depth_m = 1.0;
  double max_depth_m = 5.0;
  bool moving_camera = true;
};

SceneSpec standard_scene(const StandardSceneOptions& opts);

/// Truth for evaluation, keyed by track id.
struct TruthTrack {
  std::vector<Vec3> trajectory;
  bool is_static = false;
  int point = -1;
};
using TruthTable = std::map<std::uint32_t, TruthTrack>;

TruthTable truth_table(const GroundTruthBundle& bundle);

struct TrackDenoiseRecord {
  std::uint32_t track_id = 0;
  int point = -1;
  bool is_static = false;
  int frames = 0;
  double rmse_pre = 0.0;
  double rmse_post = 0.0;
  /// RMS distance of the visible points from their centroid.
  double std_pre = 0.0;
  double std_post = 0.0;
  /// Sum over windows {1,3,5} of squared ray-projected Laplacians.
  double accel_pre = 0.0;
  double accel_post = 0.0;
};

struct DenoiseReport {
  std::vector<TrackDenoiseRecord> records;
  std::size_t static_tracks = 0;
  std::size_t dynamic_tracks = 0;
  double static_rmse_pre = 0.0;
  double static_rmse_post = 0.0;
  double static_std_pre = 0.0;
  double static_std_post = 0.0;
  /// Mean pre-optimization std over mean post-optimization std.
  double static_jitter_ratio = 0.0;
  double dynamic_rmse_pre = 0.0;
  double dynamic_rmse_post = 0.0;
  double dynamic_fraction_rmse_improved = 0.0;
  double dynamic_fraction_accel_improved = 0.0;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// `lifted` and `optimized` must hold the same track ids in any order, and
/// every id must be present in the truth. Throws std::invalid_argument on a
/// mismatch.
DenoiseReport evaluate_denoising(const TruthTable& truth, std::span<const Track3D> lifted,
                                 std::span<const Track3D> optimized);
DenoiseReport evaluate_denoising(const GroundTruthBundle& bundle, std::span<const Track3D> lifted,
                                 std::span<const Track3D> optimized);

/// Writes a bundle in the pipeline's input formats: manifest.json, poses,
/// per-variant disparity grids and 2D track tables, plus truth files
/// (truth_tracks3d.trk, truth_points.csv). Returns the manifest path.
std::filesystem::path write_bundle(const GroundTruthBundle& bundle,
                                   const std::filesystem::path& dir, const std::string& clip_id);

/// Reads truth_tracks3d.trk and truth_points.csv from a bundle directory.
TruthTable read_truth(const std::filesystem::path& dir);

}  // namespace dynstereo
