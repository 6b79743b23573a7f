#pragma once

#include <optional>

#include "dynstereo/geometry.hpp"
#include "dynstereo/types.hpp"

namespace dynstereo {

/// Left-to-right stereo flow on a rectified pair. `cycle_error` is produced
/// upstream by the matcher (left->right->left residual, pixels).
struct StereoFlowField {
  ImageGrid flow_x;
  ImageGrid flow_y;
  ImageGrid cycle_error;
  int frame_index = 0;
};

struct DisparityMap {
  ImageGrid disparity;
  Mask valid;
  int frame_index = 0;

  [[nodiscard]] int width() const noexcept { return disparity.width(); }
  [[nodiscard]] int height() const noexcept { return disparity.height(); }
  [[nodiscard]] std::size_t valid_count() const;
};

struct DepthMap {
  ImageGrid depth;
  Mask valid;
  double baseline_m = 0.0;
  double focal_px = 0.0;
  int frame_index = 0;

  [[nodiscard]] int width() const noexcept { return depth.width(); }
  [[nodiscard]] int height() const noexcept { return depth.height(); }
  [[nodiscard]] std::size_t valid_count() const;
};

struct StereoChecks {
  double max_vertical_flow_px = 1.0;
  double max_cycle_error_px = 1.0;
};

struct DepthConfig {
  StereoChecks checks;
  double max_depth_m = 20.0;
  double grad_threshold = 0.3;
};

/// Keeps flow_x as disparity where |flow_y|, the cycle error and the sign of
/// flow_x all pass; everything else (including NaN inputs) is invalid.
DisparityMap flow_to_disparity(const StereoFlowField& flow, const StereoChecks& checks = {});

DepthMap disparity_to_depth(const DisparityMap& disp, double baseline_m, double focal_px,
                            double max_depth_m = 20.0);

/// Invalidates pixels whose central-difference depth gradient along x or y
/// exceeds threshold * depth. An axis is skipped when either neighbor along
/// it is outside the image or already invalid. All tests read the input mask.
DepthMap reject_occlusion_boundaries(const DepthMap& depth, double threshold = 0.3);

/// Flow checks, metric conversion, range cutoff and gradient test, in that
/// order.
DepthMap depth_from_flow(const StereoFlowField& flow, double baseline_m, double focal_px,
                         const DepthConfig& cfg = {});
DepthMap depth_from_disparity(const DisparityMap& disp, double baseline_m, double focal_px,
                              const DepthConfig& cfg = {});

/// Bilinear lookup in grid coordinates. Returns nullopt when the pixel is out
/// of bounds or any neighbor with nonzero weight is invalid.
std::optional<double> sample_depth(const DepthMap& depth, const Vec2& pixel);
inline std::optional<double> sample_depth(const DepthMap& depth, const PixelPoint& pixel) {
  return sample_depth(depth, pixel.uv());
}

}  // namespace dynstereo
