#include "dynstereo/tracks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace dynstereo {
namespace {

int count_visible(const std::vector<std::uint8_t>& v) {
  return static_cast<int>(std::count_if(v.begin(), v.end(), [](std::uint8_t x) { return x != 0; }));
}

// Per-frame uniform hash grid over positions of retained tracks.
class FrameBuckets {
 public:
  explicit FrameBuckets(double cell) : cell_(cell) {}

  void insert(int frame, const Vec2& p) { buckets_[key(frame, cell_of(p.x()), cell_of(p.y()))].push_back(p); }

  [[nodiscard]] bool any_within(int frame, const Vec2& p, double radius) const {
    const std::int64_t cx = cell_of(p.x());
    const std::int64_t cy = cell_of(p.y());
    const double r2 = radius * radius;
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const auto it = buckets_.find(key(frame, cx + dx, cy + dy));
        if (it == buckets_.end()) continue;
        for (const Vec2& q : it->second) {
          if ((q - p).squaredNorm() <= r2) return true;
        }
      }
    }
    return false;
  }

 private:
  [[nodiscard]] std::int64_t cell_of(double v) const {
    return static_cast<std::int64_t>(std::floor(v / cell_));
  }
  static std::uint64_t key(int frame, std::int64_t cx, std::int64_t cy) {
    // 20 bits of frame, 22 bits per cell coordinate.
    const auto f = static_cast<std::uint64_t>(frame) & 0xFFFFFu;
    const auto x = static_cast<std::uint64_t>(cx) & 0x3FFFFFu;
    const auto y = static_cast<std::uint64_t>(cy) & 0x3FFFFFu;
    return (f << 44) | (x << 22) | y;
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<Vec2>> buckets_;
};

}  // namespace

int Track2D::visible_count() const noexcept { return count_visible(visible); }
int Track3D::visible_count() const noexcept { return count_visible(visible); }

void Track3D::refresh_rays() {
  rays.resize(points.size(), Vec3::Constant(std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (visible[i]) rays[i] = (points[i] - camera_centers[i]).normalized();
  }
}

std::vector<Track2D> dedup_queries(std::vector<Track2D> tracks, double radius_px) {
  std::stable_sort(tracks.begin(), tracks.end(), [](const Track2D& a, const Track2D& b) {
    if (a.query_frame != b.query_frame) return a.query_frame < b.query_frame;
    return a.track_id < b.track_id;
  });
  FrameBuckets buckets(std::max(radius_px, 1e-6));
  std::vector<Track2D> kept;
  kept.reserve(tracks.size());
  for (Track2D& t : tracks) {
    const int q = t.query_frame;
    if (q >= 0 && q < t.num_frames() &&
        buckets.any_within(q, t.positions[static_cast<std::size_t>(q)], radius_px)) {
      continue;
    }
    for (int i = 0; i < t.num_frames(); ++i) {
      if (t.visible[static_cast<std::size_t>(i)]) buckets.insert(i, t.positions[static_cast<std::size_t>(i)]);
    }
    kept.push_back(std::move(t));
  }
  return kept;
}

Track2D remap_track(const Track2D& track, const CameraModel& from, const CameraModel& to) {
  Track2D out = track;
  for (std::size_t i = 0; i < track.positions.size(); ++i) {
    if (!track.visible[i]) continue;
    const Projection p = project_camera_ray(pixel_ray(track.positions[i], from), to);
    if (!p.in_front) {
      out.visible[i] = 0;
      continue;
    }
    out.positions[i] = p.pixel.uv();
  }
  return out;
}

Track3D lift_track_with_depths(const Track2D& track, std::span<const CameraPose> poses,
                               std::span<const double> depth_samples, const CameraModel& model) {
  const auto n = track.positions.size();
  if (track.visible.size() != n) {
    throw std::invalid_argument("lift_track: positions/visibility length mismatch");
  }
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  Track3D out;
  out.track_id = track.track_id;
  out.query_frame = track.query_frame;
  out.points.assign(n, Vec3::Constant(nan));
  out.visible.assign(n, 0);
  out.rays.assign(n, Vec3::Constant(nan));
  out.camera_centers.assign(n, Vec3::Constant(nan));
  out.pixels = track.positions;

  for (std::size_t i = 0; i < n; ++i) {
    if (!track.visible[i]) continue;
    if (i >= poses.size()) {
      throw std::out_of_range("lift_track: no pose for frame " + std::to_string(i) + " of track " +
                              std::to_string(track.track_id));
    }
    const CameraPose& pose = poses[i];
    out.camera_centers[i] = pose.position;
    if (i >= depth_samples.size()) continue;
    const double z = depth_samples[i];
    if (!std::isfinite(z) || z <= 0.0) continue;
    PixelPoint px{track.positions[i].x(), track.positions[i].y(), static_cast<int>(i)};
    const Vec3 p = unproject(px, z, pose, model);
    out.points[i] = p;
    out.rays[i] = (p - pose.position).normalized();
    out.visible[i] = 1;
  }
  return out;
}

Track3D lift_track(const Track2D& track, std::span<const CameraPose> poses,
                   std::span<const DepthMap> depths, const CameraModel& model) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> samples(track.positions.size(), nan);
  for (std::size_t i = 0; i < samples.size() && i < depths.size(); ++i) {
    if (i < track.visible.size() && track.visible[i]) {
      samples[i] = sample_depth(depths[i], track.positions[i]).value_or(nan);
    }
  }
  return lift_track_with_depths(track, poses, samples, model);
}

TrackVisibilityStats track_visibility_stats(std::span<const Track3D> tracks) {
  TrackVisibilityStats s;
  s.track_count = tracks.size();
  for (const Track3D& t : tracks) {
    if (s.per_frame_density.size() < t.visible.size()) s.per_frame_density.resize(t.visible.size(), 0);
    for (std::size_t i = 0; i < t.visible.size(); ++i) {
      if (t.visible[i]) {
        ++s.per_frame_density[i];
        ++s.visible_points;
      }
    }
  }
  if (s.track_count > 0) {
    s.mean_visible_length = static_cast<double>(s.visible_points) / static_cast<double>(s.track_count);
  }
  return s;
}

}  // namespace dynstereo
