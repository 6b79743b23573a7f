#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynstereo/config.hpp"
#include "dynstereo/filters.hpp"
#include "dynstereo/manifest.hpp"
#include "dynstereo/synth.hpp"
#include "dynstereo/trackopt.hpp"
#include "dynstereo/tracks.hpp"

namespace dynstereo {

/// Stage tags in execution order.
inline constexpr std::array<std::string_view, 9> kStageOrder = {
    "load", "depth", "dedup", "lift", "trail", "optimize", "filter", "stats", "export"};

/// Failure inside one pipeline stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct VariantInput {
  std::string name;
  CameraModel model;
  /// Disparity of clip frame i on the rectified pair.
  std::function<DisparityMap(int)> disparity_at;
  std::vector<Track2D> tracks;
  std::map<int, LabelMap> labels;
};

struct ClipInput {
  std::string clip_id;
  int frame_start = 0;
  int frame_count = 0;
  double frame_rate = 30.0;
  int source_frame_count = -1;
  std::vector<CameraPose> poses;
  RigCalibration rig;
  std::vector<VariantInput> variants;
  std::optional<MatchCountSeries> match_counts;
  /// Intensity frame i, for the built-in cross-fade matcher.
  std::function<ImageGrid(int)> frame_image;
};

struct TrackSolveInfo {
  double sigma = 0.0;
  bool warning = false;
  int returned_step = 0;
  std::vector<double> loss_trace;
};

struct ClipResult {
  std::string clip_id;
  /// Lifted (pre-optimization) and optimized tracks, index-aligned.
  std::vector<Track3D> lifted;
  std::vector<Track3D> tracks;
  std::vector<MotionMagnitude> motions;
  std::vector<TrackSolveInfo> solve;
  ClipVerdict verdict;
  ClipStats stats;
  TrackVisibilityStats visibility;
  bool camera_static = false;
  std::size_t input_tracks = 0;
  std::size_t after_dedup = 0;
  std::size_t after_lift = 0;
  std::size_t after_filter = 0;
  std::size_t optimizer_warnings = 0;
  std::vector<std::string> stage_log;

  [[nodiscard]] nlohmann::json stats_json() const;
  [[nodiscard]] nlohmann::json verdict_json() const;
};

/// Resolves a manifest into loaders. Per-frame files are read lazily.
ClipInput load_clip(const ClipManifest& manifest, const PipelineConfig& cfg);

/// In-memory input from a synthetic bundle.
ClipInput clip_input_from_bundle(const GroundTruthBundle& bundle, const std::string& clip_id);

/// Runs depth through stats on one clip. Throws StageError.
ClipResult process_clip(const ClipInput& input, const PipelineConfig& cfg);

/// Writes verdict.json, stats.json, motion.csv and stage_log.txt; track files
/// and PLY exports only for accepted clips.
void export_clip(const ClipResult& result, const std::filesystem::path& clip_dir,
                 const PipelineConfig& cfg);

struct ClipRunStatus {
  std::string clip_id;
  std::filesystem::path manifest;
  bool ok = false;
  bool accepted = false;
  std::string failed_stage;
  std::string message;
  std::vector<std::string> reasons;
};

/// Full clip run into out_root / clip_id. Never throws for clip-level
/// failures; they are reported in the status.
ClipRunStatus run_clip(const std::filesystem::path& manifest_path, const PipelineConfig& cfg,
                       const std::filesystem::path& out_root);

struct CorpusReport {
  std::vector<ClipRunStatus> clips;
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t rejected = 0;

  [[nodiscard]] nlohmann::json failures_json() const;
};

/// Every manifest.json below `root`, sorted by path.
std::vector<std::filesystem::path> discover_manifests(const std::filesystem::path& root);

/// Runs every clip on a work queue and writes failures.json and
/// corpus_summary.json into out_root.
CorpusReport run_corpus(const std::vector<std::filesystem::path>& manifests,
                        const PipelineConfig& cfg, const std::filesystem::path& out_root);

}  // namespace dynstereo
