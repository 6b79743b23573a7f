#include "dynstereo/filters.hpp"

#include <algorithm>
#include <cmath>

namespace dynstereo {
namespace {

struct PatchStats {
  double mean = 0.0;
  double std = 0.0;
};

PatchStats patch_stats(const ImageGrid& img, int x0, int y0, int size) {
  double sum = 0.0;
  double sum2 = 0.0;
  for (int y = y0; y < y0 + size; ++y) {
    for (int x = x0; x < x0 + size; ++x) {
      const double v = img(x, y);
      sum += v;
      sum2 += v * v;
    }
  }
  const double n = static_cast<double>(size) * size;
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sum2 / n - mean * mean))};
}

double ncc(const ImageGrid& a, int ax, int ay, const PatchStats& sa, const ImageGrid& b, int bx,
           int by, const PatchStats& sb, int size) {
  if (sa.std <= 1e-12 || sb.std <= 1e-12) return 0.0;
  double cross = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      cross += (a(ax + x, ay + y) - sa.mean) * (b(bx + x, by + y) - sb.mean);
    }
  }
  const double n = static_cast<double>(size) * size;
  return cross / (n * sa.std * sb.std);
}

struct Offset {
  int dx;
  int dy;
};

// Search offsets ordered by distance so ties resolve to the smallest shift.
std::vector<Offset> search_offsets(int radius) {
  std::vector<Offset> out;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) out.push_back({dx, dy});
  }
  std::stable_sort(out.begin(), out.end(), [](const Offset& l, const Offset& r) {
    return l.dx * l.dx + l.dy * l.dy < r.dx * r.dx + r.dy * r.dy;
  });
  return out;
}

struct Match {
  int x = -1;
  int y = -1;
  double score = -2.0;
};

Match best_match(const ImageGrid& src, int sx, int sy, const PatchStats& ss, const ImageGrid& dst,
                 const std::vector<Offset>& offsets, int size) {
  Match best;
  for (const Offset& o : offsets) {
    const int x = sx + o.dx;
    const int y = sy + o.dy;
    if (x < 0 || y < 0 || x + size > dst.width() || y + size > dst.height()) continue;
    const PatchStats ds = patch_stats(dst, x, y, size);
    const double s = ncc(src, sx, sy, ss, dst, x, y, ds, size);
    if (s > best.score) best = {x, y, s};
  }
  return best;
}

}  // namespace

const std::string* LabelMap::label_at(const Vec2& px) const {
  if (!px.allFinite()) return nullptr;
  const int x = static_cast<int>(std::lround(px.x()));
  const int y = static_cast<int>(std::lround(px.y()));
  if (!ids.contains(x, y) || !class_names) return nullptr;
  const std::int32_t id = ids(x, y);
  if (id < 0 || static_cast<std::size_t>(id) >= class_names->size()) return nullptr;
  return &(*class_names)[static_cast<std::size_t>(id)];
}

std::set<std::string> default_banned_classes() {
  return {"wall", "walls", "building", "road", "earth", "sidewalk"};
}

std::vector<TrackWithMotion> prune_semantic_drift(std::vector<TrackWithMotion> tracks,
                                                  const std::map<int, LabelMap>& labels,
                                                  const std::set<std::string>& banned,
                                                  double m_threshold) {
  std::vector<TrackWithMotion> kept;
  kept.reserve(tracks.size());
  for (auto& t : tracks) {
    if (t.motion.m <= m_threshold) {
      kept.push_back(std::move(t));
      continue;
    }
    int total = 0;
    int banned_count = 0;
    for (int i = 0; i < t.track.num_frames(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (!t.track.visible[ui] || ui >= t.track.pixels.size()) continue;
      const auto it = labels.find(i);
      if (it == labels.end()) continue;
      const std::string* name = it->second.label_at(t.track.pixels[ui]);
      if (name == nullptr) continue;
      ++total;
      if (banned.contains(*name)) ++banned_count;
    }
    if (total > 0 && 2 * banned_count > total) continue;
    kept.push_back(std::move(t));
  }
  return kept;
}

bool detect_cross_fade(const MatchCountSeries& matches, bool camera_static, int min_matches) {
  if (!camera_static) return false;
  return std::any_of(matches.pairs.begin(), matches.pairs.end(),
                     [&](const FramePairCount& p) { return p.count < min_matches; });
}

int textured_patch_count(const ImageGrid& frame, const MatcherParams& params) {
  int count = 0;
  for (int y = 0; y + params.patch <= frame.height(); y += params.stride) {
    for (int x = 0; x + params.patch <= frame.width(); x += params.stride) {
      if (patch_stats(frame, x, y, params.patch).std >= params.min_patch_std) ++count;
    }
  }
  return count;
}

int builtin_match_count(const ImageGrid& frame_a, const ImageGrid& frame_b,
                        const MatcherParams& params) {
  if (!frame_a.same_shape(frame_b)) {
    throw std::invalid_argument("builtin_match_count: frames differ in size");
  }
  const auto offsets = search_offsets(params.search_radius);
  const int size = params.patch;
  int count = 0;
  for (int y = 0; y + size <= frame_a.height(); y += params.stride) {
    for (int x = 0; x + size <= frame_a.width(); x += params.stride) {
      const PatchStats sa = patch_stats(frame_a, x, y, size);
      if (sa.std < params.min_patch_std) continue;
      const Match fwd = best_match(frame_a, x, y, sa, frame_b, offsets, size);
      if (fwd.score <= params.min_ncc) continue;
      const PatchStats sb = patch_stats(frame_b, fwd.x, fwd.y, size);
      if (sb.std < params.min_patch_std) continue;
      const Match back = best_match(frame_b, fwd.x, fwd.y, sb, frame_a, offsets, size);
      if (back.x == x && back.y == y) ++count;
    }
  }
  return count;
}

bool camera_static_test(std::span<const CameraPose> poses, double trans_thresh_m,
                        double rot_thresh_deg) {
  if (poses.size() < 2) throw std::invalid_argument("camera_static_test: needs at least 2 poses");
  const double rot_thresh = rot_thresh_deg * std::acos(-1.0) / 180.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    for (std::size_t j = i + 1; j < poses.size(); ++j) {
      if ((poses[i].position - poses[j].position).norm() >= trans_thresh_m) return false;
      if (rotation_angle(poses[i].orientation.transpose() * poses[j].orientation) >= rot_thresh) {
        return false;
      }
    }
  }
  return true;
}

FrameRange trimmed_range(int source_frame_count, double trim_frac) {
  if (source_frame_count < 0 || !(trim_frac >= 0.0 && trim_frac < 0.5)) {
    throw std::invalid_argument("trimmed_range: bad arguments");
  }
  const int cut = static_cast<int>(std::ceil(trim_frac * source_frame_count - 1e-9));
  return {cut, source_frame_count - cut};
}

bool touches_trimmed_boundary(int clip_start, int clip_frames, int source_frame_count,
                              double trim_frac) {
  const FrameRange keep = trimmed_range(source_frame_count, trim_frac);
  return clip_start < keep.first || clip_start + clip_frames > keep.last;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kCrossFade:
      return "cross_fade";
    case RejectReason::kStaticImage:
      return "static_image";
    case RejectReason::kBoundaryTrim:
      return "boundary_trim";
  }
  return "unknown";
}

void ClipVerdict::reject(RejectReason r) {
  if (std::find(reasons.begin(), reasons.end(), r) == reasons.end()) reasons.push_back(r);
  accepted = false;
}

bool is_static_image(bool camera_static, std::span<const MotionMagnitude> motions,
                     double max_motion_px) {
  if (!camera_static) return false;
  return std::all_of(motions.begin(), motions.end(),
                     [&](const MotionMagnitude& m) { return m.m <= max_motion_px; });
}

ClipStats clip_stats(std::span<const MotionMagnitude> motions, std::span<const CameraPose> poses,
                     double moving_threshold_px) {
  ClipStats s;
  s.frame_count = poses.size();
  if (!poses.empty()) {
    const auto [first, last] = std::minmax_element(
        poses.begin(), poses.end(),
        [](const CameraPose& a, const CameraPose& b) { return a.frame_index < b.frame_index; });
    s.camera_displacement_m = (last->position - first->position).norm();
  }
  s.track_count = motions.size();
  s.moving_track_count = static_cast<std::size_t>(std::count_if(
      motions.begin(), motions.end(),
      [&](const MotionMagnitude& m) { return m.m > moving_threshold_px; }));
  if (s.track_count > 0) {
    s.percent_tracks_above_50px =
        100.0 * static_cast<double>(s.moving_track_count) / static_cast<double>(s.track_count);
  }
  return s;
}

}  // namespace dynstereo
