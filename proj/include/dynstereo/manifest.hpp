#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynstereo/filters.hpp"
#include "dynstereo/geometry.hpp"

namespace dynstereo {

/// Inputs of one camera variant. Exactly one of disparity_dir / flow_dir is
/// set; per-frame files inside them are named by frame_file_name(i) with i
/// the clip-local frame index.
struct VariantManifest {
  std::string name;
  CameraModel camera;
  std::filesystem::path disparity_dir;
  std::filesystem::path flow_dir;
  std::filesystem::path tracks;
  std::filesystem::path labels_dir;
};

struct ClipManifest {
  std::string clip_id;
  /// First frame of the clip within its source video.
  int frame_start = 0;
  int frame_count = 0;
  double frame_rate = 30.0;
  /// Length of the source video, -1 when unknown (boundary trim is skipped).
  int source_frame_count = -1;
  std::filesystem::path poses;
  RigCalibration rig;
  std::vector<VariantManifest> variants;
  std::filesystem::path match_counts;
  std::filesystem::path frames_dir;
  std::filesystem::path class_names;
  /// Directory the relative paths above resolve against.
  std::filesystem::path base_dir;

  [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const;
  /// Structural checks; does not look at per-frame files.
  void validate() const;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ClipManifest load_manifest(const std::filesystem::path& path);
/// Writes paths relative to the manifest's directory when possible.
void save_manifest(const ClipManifest& manifest, const std::filesystem::path& path);

nlohmann::json camera_to_json(const CameraModel& model);
CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json rig_to_json(const RigCalibration& rig);
RigCalibration rig_from_json(const nlohmann::json& j);

/// Poses file: JSON array of {frame_index, position[3], orientation[9]}
/// with the orientation row-major.
std::vector<CameraPose> load_poses(const std::filesystem::path& path);
void save_poses(const std::filesystem::path& path, const std::vector<CameraPose>& poses);

/// CSV with header frame_a,frame_b,count. The gap is taken from the pairs.
MatchCountSeries load_match_counts(const std::filesystem::path& path);
void save_match_counts(const std::filesystem::path& path, const MatchCountSeries& series);

/// One class name per line; line k names class id k.
std::vector<std::string> load_class_names(const std::filesystem::path& path);

}  // namespace dynstereo
