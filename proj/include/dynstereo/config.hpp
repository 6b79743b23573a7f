#pragma once

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>

#include "dynstereo/depth.hpp"
#include "dynstereo/filters.hpp"
#include "dynstereo/trackopt.hpp"

namespace dynstereo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FilterConfig {
  double semantic_m_threshold = 20.0;
  std::set<std::string> banned_classes = default_banned_classes();
  int min_matches = 5;
  /// Frame gap of the cross-fade match test, seconds.
  double cross_fade_gap_s = 5.0;
  double trim_frac = 0.05;
  double static_translation_m = 0.05;
  double static_rotation_deg = 1.0;
  double static_image_motion_px = 0.5;
  double moving_track_px = 50.0;
  MatcherParams matcher;
};

struct PipelineConfig {
  DepthConfig depth;
  double baseline_m = kNominalBaselineM;
  double dedup_radius_px = 1.0;
  OptimizerConfig optimizer;
  FilterConfig filters;
  int threads = 1;
  std::filesystem::path input_dir;
  std::filesystem::path output_dir;
  bool export_lifted_tracks = true;
  bool export_loss_traces = false;
  /// Frame written as a PLY point cloud, or -1 for none.
  int export_ply_frame = -1;
  bool export_trajectories_ply = false;

  /// Range checks; input_dir must exist when set.
  void validate() const;
};

/// Defaults with the worker count taken from the environment.
PipelineConfig default_config();

/// Applies a TOML-like document to `cfg`: `[section]` headers, `key = value`
/// lines, `#` comments. Values are numbers, true/false, quoted or bare
/// strings, or comma lists (optionally in brackets). Unknown keys throw.
void apply_config_text(PipelineConfig& cfg, const std::string& text,
                       const std::string& source = "<config>");
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);
/// Sets one `section.key` entry.
void set_config_value(PipelineConfig& cfg, const std::string& dotted_key, const std::string& value);

/// Serializes every setting so that apply_config_text round-trips it.
std::string config_to_text(const PipelineConfig& cfg);

}  // namespace dynstereo
