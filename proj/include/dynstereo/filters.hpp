#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dynstereo/geometry.hpp"
#include "dynstereo/trackopt.hpp"
#include "dynstereo/tracks.hpp"

namespace dynstereo {

struct LabelMap {
  Grid<std::int32_t> ids;
  /// Shared class-name table; id k names class_names[k].
  std::shared_ptr<const std::vector<std::string>> class_names;
  int frame_index = 0;

  /// Class name at a pixel (nearest sample), or nullptr when outside the
  /// grid or the id is not in the table.
  [[nodiscard]] const std::string* label_at(const Vec2& px) const;
};

/// Default ADE20K categories whose moving tracks are treated as drift.
std::set<std::string> default_banned_classes();

struct TrackWithMotion {
  Track3D track;
  MotionMagnitude motion;
};

/// Drops a track iff m > m_threshold and a strict majority of its visible
/// frames with an available label map fall on a banned class. Labels are read
/// at the track's provenance pixels.
std::vector<TrackWithMotion> prune_semantic_drift(std::vector<TrackWithMotion> tracks,
                                                  const std::map<int, LabelMap>& labels,
                                                  const std::set<std::string>& banned,
                                                  double m_threshold = 20.0);

struct FramePairCount {
  int frame_a = 0;
  int frame_b = 0;
  int count = 0;
};

struct MatchCountSeries {
  /// Frame gap between the members of every pair.
  int gap = 0;
  std::vector<FramePairCount> pairs;
};

bool detect_cross_fade(const MatchCountSeries& matches, bool camera_static, int min_matches = 5);

struct MatcherParams {
  int patch = 16;
  int stride = 32;
  int search_radius = 16;
  double min_ncc = 0.8;
  /// Patches with intensity std below this are untextured and never counted.
  double min_patch_std = 2.0;
};

/// Stand-in for a SIFT match count: grid-sampled patches whose best NCC match
/// in the other frame exceeds min_ncc and is mutually best.
int builtin_match_count(const ImageGrid& frame_a, const ImageGrid& frame_b,
                        const MatcherParams& params = {});

/// Number of patches the built-in matcher would consider textured.
int textured_patch_count(const ImageGrid& frame, const MatcherParams& params = {});

bool camera_static_test(std::span<const CameraPose> poses, double trans_thresh_m = 0.05,
                        double rot_thresh_deg = 1.0);

/// Frames [first, last) of a source video kept after trimming `trim_frac`
/// of its length at both ends.
struct FrameRange {
  int first = 0;
  int last = 0;
};
FrameRange trimmed_range(int source_frame_count, double trim_frac = 0.05);
/// True when the clip [clip_start, clip_start + clip_frames) reaches into a
/// trimmed boundary region.
bool touches_trimmed_boundary(int clip_start, int clip_frames, int source_frame_count,
                              double trim_frac = 0.05);

enum class RejectReason { kCrossFade, kStaticImage, kBoundaryTrim };
std::string_view to_string(RejectReason r);

struct ClipVerdict {
  bool accepted = true;
  std::vector<RejectReason> reasons;

  void reject(RejectReason r);
};

/// A clip looks like a still image when the camera is static and no track
/// moves more than `max_motion_px`.
bool is_static_image(bool camera_static, std::span<const MotionMagnitude> motions,
                     double max_motion_px = 0.5);

struct ClipStats {
  double camera_displacement_m = 0.0;
  double percent_tracks_above_50px = 0.0;
  std::size_t track_count = 0;
  std::size_t moving_track_count = 0;
  std::size_t frame_count = 0;
};

ClipStats clip_stats(std::span<const MotionMagnitude> motions, std::span<const CameraPose> poses,
                     double moving_threshold_px = 50.0);

}  // namespace dynstereo
