#include "dynstereo/depth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dynstereo {
namespace {

std::size_t count_valid(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

}  // namespace

std::size_t DisparityMap::valid_count() const { return count_valid(valid); }
std::size_t DepthMap::valid_count() const { return count_valid(valid); }

DisparityMap flow_to_disparity(const StereoFlowField& flow, const StereoChecks& checks) {
  if (!flow.flow_x.same_shape(flow.flow_y) || !flow.flow_x.same_shape(flow.cycle_error)) {
    throw std::invalid_argument("flow_to_disparity: flow grids differ in shape");
  }
  DisparityMap out;
  out.frame_index = flow.frame_index;
  out.disparity = ImageGrid(flow.flow_x.width(), flow.flow_x.height(), 0.0);
  out.valid = Mask(flow.flow_x.width(), flow.flow_x.height(), 0);
  const auto& fx = flow.flow_x.data();
  const auto& fy = flow.flow_y.data();
  const auto& ce = flow.cycle_error.data();
  auto& d = out.disparity.data();
  auto& v = out.valid.data();
  for (std::size_t i = 0; i < fx.size(); ++i) {
    // Comparisons with NaN are false, so NaN inputs fall out here.
    const bool ok = std::isfinite(fx[i]) && fx[i] > 0.0 &&
                    std::abs(fy[i]) <= checks.max_vertical_flow_px &&
                    ce[i] <= checks.max_cycle_error_px;
    if (ok) {
      d[i] = fx[i];
      v[i] = 1;
    }
  }
  return out;
}

DepthMap disparity_to_depth(const DisparityMap& disp, double baseline_m, double focal_px,
                            double max_depth_m) {
  if (!(baseline_m > 0.0) || !(focal_px > 0.0)) {
    throw std::invalid_argument("disparity_to_depth: baseline and focal must be positive");
  }
  if (!disp.disparity.same_shape(disp.valid)) {
    throw std::invalid_argument("disparity_to_depth: mask shape mismatch");
  }
  DepthMap out;
  out.frame_index = disp.frame_index;
  out.baseline_m = baseline_m;
  out.focal_px = focal_px;
  out.depth = ImageGrid(disp.width(), disp.height(), 0.0);
  out.valid = Mask(disp.width(), disp.height(), 0);
  const double bf = baseline_m * focal_px;
  const auto& d = disp.disparity.data();
  const auto& vin = disp.valid.data();
  auto& z = out.depth.data();
  auto& vout = out.valid.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!vin[i] || !(d[i] > 0.0) || !std::isfinite(d[i])) continue;
    const double depth = bf / d[i];
    if (depth > max_depth_m) continue;
    z[i] = depth;
    vout[i] = 1;
  }
  return out;
}

DepthMap reject_occlusion_boundaries(const DepthMap& depth, double threshold) {
  DepthMap out = depth;
  const int w = depth.width();
  const int h = depth.height();
  const auto usable = [&](int x, int y) { return depth.valid.contains(x, y) && depth.valid(x, y); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth.valid(x, y)) continue;
      const double limit = threshold * depth.depth(x, y);
      bool reject = false;
      if (usable(x - 1, y) && usable(x + 1, y)) {
        reject = std::abs(depth.depth(x + 1, y) - depth.depth(x - 1, y)) > limit;
      }
      if (!reject && usable(x, y - 1) && usable(x, y + 1)) {
        reject = std::abs(depth.depth(x, y + 1) - depth.depth(x, y - 1)) > limit;
      }
      if (reject) out.valid(x, y) = 0;
    }
  }
  return out;
}

DepthMap depth_from_disparity(const DisparityMap& disp, double baseline_m, double focal_px,
                              const DepthConfig& cfg) {
  return reject_occlusion_boundaries(disparity_to_depth(disp, baseline_m, focal_px, cfg.max_depth_m),
                                     cfg.grad_threshold);
}

DepthMap depth_from_flow(const StereoFlowField& flow, double baseline_m, double focal_px,
                         const DepthConfig& cfg) {
  return depth_from_disparity(flow_to_disparity(flow, cfg.checks), baseline_m, focal_px, cfg);
}

std::optional<double> sample_depth(const DepthMap& depth, const Vec2& pixel) {
  const double x = pixel.x();
  const double y = pixel.y();
  if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
  if (x < 0.0 || y < 0.0 || x > depth.width() - 1 || y > depth.height() - 1) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    const double wy = dy == 0 ? 1.0 - fy : fy;
    if (wy == 0.0) continue;
    for (int dx = 0; dx <= 1; ++dx) {
      const double wx = dx == 0 ? 1.0 - fx : fx;
      if (wx == 0.0) continue;
      if (!depth.valid(x0 + dx, y0 + dy)) return std::nullopt;
      acc += wx * wy * depth.depth(x0 + dx, y0 + dy);
    }
  }
  return acc;
}

}  // namespace dynstereo
