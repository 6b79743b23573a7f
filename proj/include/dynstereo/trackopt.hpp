#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dynstereo/geometry.hpp"
#include "dynstereo/tracks.hpp"

namespace dynstereo {

struct OptimizerConfig {
  double lr = 0.05;
  int steps = 100;
  double lambda_reg = 1e-4;
  std::vector<int> windows{1, 3, 5};
  /// Trail window w_o, frames.
  int trail_window = 16;
  double m0 = 20.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Adjusted depth is kept at or above this fraction of the lifted depth.
  double min_depth_fraction = 0.01;

  void validate() const;
};

/// Scalar offsets along the camera ray, one per visible frame in frame order.
struct OffsetVector {
  std::vector<double> deltas;
};

struct MotionMagnitude {
  double m = 0.0;
  /// Trail length of every frame that had at least one usable earlier frame.
  std::vector<double> trail_lengths;
  bool empty_trail = true;
};

/// Visible frames of a Track3D laid out for the objective: points, unit
/// rays, ray lengths and the Laplacian stencils that are fully visible.
class RayTrack {
 public:
  struct Stencil {
    int prev;
    int center;
    int next;
    double base;        // (p_next - 2 p_center + p_prev) . r_center
    double prev_coef;   // r_prev . r_center
    double center_coef; // -2 r_center . r_center
    double next_coef;   // r_next . r_center
  };

  RayTrack(const Track3D& track, std::span<const int> windows);

  [[nodiscard]] int size() const noexcept { return static_cast<int>(frames_.size()); }
  [[nodiscard]] const std::vector<int>& frames() const noexcept { return frames_; }
  [[nodiscard]] const std::vector<Vec3>& points() const noexcept { return points_; }
  [[nodiscard]] const std::vector<Vec3>& rays() const noexcept { return rays_; }
  [[nodiscard]] const std::vector<double>& distances() const noexcept { return distances_; }
  [[nodiscard]] const std::vector<Stencil>& stencils() const noexcept { return stencils_; }

  [[nodiscard]] Vec3 adjusted(int k, double delta) const {
    return points_[static_cast<std::size_t>(k)] + delta * rays_[static_cast<std::size_t>(k)];
  }

 private:
  std::vector<int> frames_;
  std::vector<Vec3> points_;
  std::vector<Vec3> rays_;
  std::vector<double> distances_;
  std::vector<Stencil> stencils_;
};

struct ObjectiveTerms {
  double static_loss = 0.0;
  double dynamic_loss = 0.0;
  double reg_loss = 0.0;
  double total = 0.0;
  /// Mean norm of the adjusted points used to normalize the static term.
  double static_normalizer = 0.0;
};

/// Mean norm of the adjusted points.
double static_normalizer(const RayTrack& rt, std::span<const double> deltas);

/// Sum over ordered pairs of squared distances between adjusted points,
/// divided by the squared normalizer. Evaluated in O(N) through the centroid.
/// `normalizer` defaults to the value at `deltas`.
double static_loss(const RayTrack& rt, std::span<const double> deltas,
                   std::optional<double> normalizer = std::nullopt);
double dynamic_loss(const RayTrack& rt, std::span<const double> deltas);
double reg_loss(const RayTrack& rt, std::span<const double> deltas, double lambda_reg);

/// Track3D conveniences. static_loss throws with fewer than 2 visible frames.
double static_loss(const Track3D& track, const OffsetVector& deltas);
double dynamic_loss(const Track3D& track, const OffsetVector& deltas, std::span<const int> windows);
double reg_loss(const Track3D& track, const OffsetVector& deltas, double lambda_reg);

/// 1 / (1 + exp(m - m0)) without overflow.
double sigma_gate(double m, double m0 = 20.0);

/// 90th nearest-rank percentile of per-frame trail lengths. Both points of a
/// trail are projected with the camera of the later frame. Earlier points
/// behind that camera are skipped.
MotionMagnitude trail_motion_magnitude(const Track3D& track, std::span<const CameraPose> poses,
                                       const CameraModel& model, int trail_window = 16);

/// Nearest-rank percentile (ceil(q * n)-th order statistic), q in (0, 1].
double nearest_rank_percentile(std::vector<double> values, double q);

ObjectiveTerms evaluate_objective(const RayTrack& rt, std::span<const double> deltas, double sigma,
                                  double lambda_reg,
                                  std::optional<double> normalizer = std::nullopt);

/// Gradient of the gated objective with the static normalizer held at its
/// value for `deltas`.
std::vector<double> analytic_gradient(const RayTrack& rt, std::span<const double> deltas,
                                      double sigma, double lambda_reg);
std::vector<double> analytic_gradient(const Track3D& track, const OffsetVector& deltas,
                                      const MotionMagnitude& m, const OptimizerConfig& cfg);

struct OptimizeResult {
  OffsetVector offsets;
  Track3D adjusted;
  /// Objective at the initial iterate and after every step.
  std::vector<double> loss_trace;
  double initial_objective = 0.0;
  double returned_objective = 0.0;
  double sigma = 0.0;
  /// Set when the last iterate ended above the initial objective; the best
  /// iterate seen is returned instead.
  bool warning = false;
  int returned_step = 0;
};

OptimizeResult optimize_track(const Track3D& track, const MotionMagnitude& m,
                              const OptimizerConfig& cfg);

/// Per-track optimization over a work queue. Output order matches input and
/// results do not depend on `threads`.
std::vector<OptimizeResult> optimize_tracks(std::span<const Track3D> tracks,
                                            std::span<const MotionMagnitude> magnitudes,
                                            const OptimizerConfig& cfg, int threads);

/// Applies offsets to a track (p' = p + delta * r on visible frames).
Track3D apply_offsets(const Track3D& track, const OffsetVector& offsets);

}  // namespace dynstereo
