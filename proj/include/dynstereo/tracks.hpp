#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dynstereo/depth.hpp"
#include "dynstereo/geometry.hpp"

namespace dynstereo {

/// One long-range 2D trajectory. Entry i of `positions` / `visible` belongs
/// to clip frame i.
struct Track2D {
  std::uint32_t track_id = 0;
  int query_frame = 0;
  std::vector<Vec2> positions;
  std::vector<std::uint8_t> visible;

  [[nodiscard]] int num_frames() const noexcept { return static_cast<int>(positions.size()); }
  [[nodiscard]] int visible_count() const noexcept;
};

/// World-space trajectory with per-frame rays and camera centers kept next
/// to the points for the optimizer. Invisible frames hold NaN points.
struct Track3D {
  std::uint32_t track_id = 0;
  int query_frame = 0;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> visible;
  std::vector<Vec3> rays;
  std::vector<Vec3> camera_centers;
  /// Provenance: the 2D position each point was lifted from, and which
  /// camera variant produced it.
  std::vector<Vec2> pixels;
  int source_variant = 0;

  [[nodiscard]] int num_frames() const noexcept { return static_cast<int>(points.size()); }
  [[nodiscard]] int visible_count() const noexcept;
  /// Recomputes rays from points and camera centers on visible frames.
  void refresh_rays();
};

/// Drops a track when an already retained track passes within `radius_px`
/// of its query point at its query frame. Tracks are visited in
/// (query_frame, track_id) order and the result keeps that order.
std::vector<Track2D> dedup_queries(std::vector<Track2D> tracks, double radius_px = 1.0);

/// Re-expresses pixel positions of a track from one camera model in another
/// sharing the same center and orientation. Frames whose ray falls outside
/// `to` become invisible.
Track2D remap_track(const Track2D& track, const CameraModel& from, const CameraModel& to);

/// `poses[i]` and `depths[i]` belong to clip frame i. Visible frames whose
/// depth sample is invalid (or whose depth map is missing) become invisible.
/// Throws std::out_of_range when a visible frame has no pose.
Track3D lift_track(const Track2D& track, std::span<const CameraPose> poses,
                   std::span<const DepthMap> depths, const CameraModel& model);

/// Lifting from pre-sampled depths: `depth_samples[i]` is the depth at the
/// track's frame-i position, NaN when no valid sample exists.
Track3D lift_track_with_depths(const Track2D& track, std::span<const CameraPose> poses,
                               std::span<const double> depth_samples, const CameraModel& model);

struct TrackVisibilityStats {
  std::size_t track_count = 0;
  std::size_t visible_points = 0;
  double mean_visible_length = 0.0;
  /// Number of visible tracks per frame.
  std::vector<std::size_t> per_frame_density;
};

TrackVisibilityStats track_visibility_stats(std::span<const Track3D> tracks);

}  // namespace dynstereo
