#pragma once

#include <cstddef>
#include <span>

#include "json.hpp"

#include "dynstereo/geometry.hpp"
#include "dynstereo/tracks.hpp"

namespace dynstereo {

struct SceneFlowMetrics {
  double epe3d = 0.0;
  /// Percentage of motion vectors with error below 5 cm / 10 cm.
  double delta_005 = 0.0;
  double delta_010 = 0.0;
  double abs_rel = 0.0;
  /// Percentage of points with max(pred/true, true/pred) depth ratio < 1.25.
  double delta_125 = 0.0;
  /// Factor applied to predictions before scoring.
  double scale = 1.0;
  std::size_t matched_flows = 0;
  std::size_t matched_points = 0;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Scene-flow and depth metrics between frame_a and frame_b. Tracks are
/// matched by id; a flow needs both frames visible in both tracks. All
/// points are first expressed in the `reference` camera frame, and depth is
/// the z coordinate there. Predictions are scaled by the median of
/// |truth| / |pred| over matched frame_a points. Throws
/// std::invalid_argument when nothing matches.
SceneFlowMetrics eval_metrics(std::span<const Track3D> pred, std::span<const Track3D> truth,
                              int frame_a, int frame_b, const CameraPose& reference = {});

/// Median with the two middle values averaged for even counts.
double median(std::vector<double> values);

}  // namespace dynstereo
