#include "dynstereo/trackopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "dynstereo/parallel.hpp"

namespace dynstereo {
namespace {

constexpr double kMinNormalizer = 1e-12;

std::span<const double> as_span(const OffsetVector& o) { return o.deltas; }

void check_size(const RayTrack& rt, std::span<const double> deltas) {
  if (deltas.size() != static_cast<std::size_t>(rt.size())) {
    throw std::invalid_argument("offset count " + std::to_string(deltas.size()) +
                                " does not match visible frame count " +
                                std::to_string(rt.size()));
  }
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("optimizer: lr must be positive");
  if (steps < 1) throw std::invalid_argument("optimizer: steps must be >= 1");
  if (windows.empty()) throw std::invalid_argument("optimizer: window set is empty");
  if (std::set<int>(windows.begin(), windows.end()).size() != windows.size()) {
    throw std::invalid_argument("optimizer: duplicate window");
  }
  for (int w : windows) {
    if (w < 1) throw std::invalid_argument("optimizer: windows must be >= 1");
  }
  if (trail_window < 1) throw std::invalid_argument("optimizer: trail window must be >= 1");
  if (!(lambda_reg >= 0.0)) throw std::invalid_argument("optimizer: lambda_reg must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) {
    throw std::invalid_argument("optimizer: bad Adam parameters");
  }
  if (!(min_depth_fraction > 0.0 && min_depth_fraction < 1.0)) {
    throw std::invalid_argument("optimizer: min_depth_fraction must lie in (0, 1)");
  }
}

RayTrack::RayTrack(const Track3D& track, std::span<const int> windows) {
  const int n = track.num_frames();
  std::vector<int> ordinal(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!track.visible[ui]) continue;
    const Vec3 offset = track.points[ui] - track.camera_centers[ui];
    const double d = offset.norm();
    if (!std::isfinite(d) || !(d > 0.0)) {
      throw std::invalid_argument("track " + std::to_string(track.track_id) +
                                  ": degenerate ray at frame " + std::to_string(i));
    }
    ordinal[ui] = static_cast<int>(frames_.size());
    frames_.push_back(i);
    points_.push_back(track.points[ui]);
    rays_.push_back(offset / d);
    distances_.push_back(d);
  }
  for (int k = 0; k < size(); ++k) {
    const int i = frames_[static_cast<std::size_t>(k)];
    for (int w : windows) {
      if (i - w < 0 || i + w >= n) continue;
      const int a = ordinal[static_cast<std::size_t>(i - w)];
      const int c = ordinal[static_cast<std::size_t>(i + w)];
      if (a < 0 || c < 0) continue;
      const Vec3& rb = rays_[static_cast<std::size_t>(k)];
      const Vec3& pa = points_[static_cast<std::size_t>(a)];
      const Vec3& pb = points_[static_cast<std::size_t>(k)];
      const Vec3& pc = points_[static_cast<std::size_t>(c)];
      stencils_.push_back(Stencil{a, k, c, (pc - 2.0 * pb + pa).dot(rb),
                                  rays_[static_cast<std::size_t>(a)].dot(rb), -2.0 * rb.dot(rb),
                                  rays_[static_cast<std::size_t>(c)].dot(rb)});
    }
  }
}

double static_normalizer(const RayTrack& rt, std::span<const double> deltas) {
  check_size(rt, deltas);
  double sum = 0.0;
  for (int k = 0; k < rt.size(); ++k) sum += rt.adjusted(k, deltas[static_cast<std::size_t>(k)]).norm();
  return rt.size() > 0 ? sum / rt.size() : 0.0;
}

double static_loss(const RayTrack& rt, std::span<const double> deltas,
                   std::optional<double> normalizer) {
  check_size(rt, deltas);
  const int n = rt.size();
  if (n < 2) throw std::invalid_argument("static_loss: needs at least 2 visible frames");
  Vec3 mean = Vec3::Zero();
  for (int k = 0; k < n; ++k) mean += rt.adjusted(k, deltas[static_cast<std::size_t>(k)]);
  mean /= n;
  double spread = 0.0;
  for (int k = 0; k < n; ++k) {
    spread += (rt.adjusted(k, deltas[static_cast<std::size_t>(k)]) - mean).squaredNorm();
  }
  const double np = std::max(normalizer.value_or(static_normalizer(rt, deltas)), kMinNormalizer);
  // sum_ij |p_i - p_j|^2 = 2 N sum_i |p_i - mean|^2
  return 2.0 * n * spread / (np * np);
}

double dynamic_loss(const RayTrack& rt, std::span<const double> deltas) {
  check_size(rt, deltas);
  double sum = 0.0;
  for (const auto& s : rt.stencils()) {
    const double acc = s.base + s.prev_coef * deltas[static_cast<std::size_t>(s.prev)] +
                       s.center_coef * deltas[static_cast<std::size_t>(s.center)] +
                       s.next_coef * deltas[static_cast<std::size_t>(s.next)];
    sum += acc * acc;
  }
  return sum;
}

double reg_loss(const RayTrack& rt, std::span<const double> deltas, double lambda_reg) {
  check_size(rt, deltas);
  double sum = 0.0;
  for (int k = 0; k < rt.size(); ++k) {
    const double d = rt.distances()[static_cast<std::size_t>(k)];
    const double delta = deltas[static_cast<std::size_t>(k)];
    if (!(delta + d > 0.0)) {
      throw std::domain_error("reg_loss: offset reaches the camera center at frame " +
                              std::to_string(rt.frames()[static_cast<std::size_t>(k)]));
    }
    const double diff = 1.0 / (delta + d) - 1.0 / d;
    sum += diff * diff;
  }
  return lambda_reg * sum;
}

double static_loss(const Track3D& track, const OffsetVector& deltas) {
  const RayTrack rt(track, {});
  return static_loss(rt, as_span(deltas));
}

double dynamic_loss(const Track3D& track, const OffsetVector& deltas, std::span<const int> windows) {
  const RayTrack rt(track, windows);
  return dynamic_loss(rt, as_span(deltas));
}

double reg_loss(const Track3D& track, const OffsetVector& deltas, double lambda_reg) {
  const RayTrack rt(track, {});
  return reg_loss(rt, as_span(deltas), lambda_reg);
}

double sigma_gate(double m, double m0) {
  const double x = m - m0;
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("percentile fraction must lie in (0, 1]");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

MotionMagnitude trail_motion_magnitude(const Track3D& track, std::span<const CameraPose> poses,
                                       const CameraModel& model, int trail_window) {
  if (trail_window < 1) throw std::invalid_argument("trail window must be >= 1");
  MotionMagnitude out;
  const int n = track.num_frames();
  for (int i = 1; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!track.visible[ui]) continue;
    if (ui >= poses.size()) throw std::out_of_range("trail_motion_magnitude: missing pose");
    const CameraPose& cam = poses[ui];
    const Projection cur = project(track.points[ui], cam, model);
    if (!cur.in_front) continue;
    double trail = -1.0;
    for (int w = 1; w <= trail_window && w <= i; ++w) {
      const auto uj = static_cast<std::size_t>(i - w);
      if (!track.visible[uj]) continue;
      const Projection prev = project(track.points[uj], cam, model);
      if (!prev.in_front) continue;
      trail = std::max(trail, (cur.pixel.uv() - prev.pixel.uv()).norm());
    }
    if (trail >= 0.0) out.trail_lengths.push_back(trail);
  }
  out.empty_trail = out.trail_lengths.empty();
  out.m = out.empty_trail ? 0.0 : nearest_rank_percentile(out.trail_lengths, 0.9);
  return out;
}

ObjectiveTerms evaluate_objective(const RayTrack& rt, std::span<const double> deltas, double sigma,
                                  double lambda_reg, std::optional<double> normalizer) {
  ObjectiveTerms t;
  t.static_normalizer = normalizer.value_or(static_normalizer(rt, deltas));
  t.static_loss = static_loss(rt, deltas, t.static_normalizer);
  t.dynamic_loss = dynamic_loss(rt, deltas);
  t.reg_loss = reg_loss(rt, deltas, lambda_reg);
  t.total = sigma * t.static_loss + (1.0 - sigma) * t.dynamic_loss + t.reg_loss;
  return t;
}

std::vector<double> analytic_gradient(const RayTrack& rt, std::span<const double> deltas,
                                      double sigma, double lambda_reg) {
  check_size(rt, deltas);
  const int n = rt.size();
  std::vector<double> grad(static_cast<std::size_t>(n), 0.0);
  if (n >= 2 && sigma != 0.0) {
    Vec3 mean = Vec3::Zero();
    for (int k = 0; k < n; ++k) mean += rt.adjusted(k, deltas[static_cast<std::size_t>(k)]);
    mean /= n;
    const double np = std::max(static_normalizer(rt, deltas), kMinNormalizer);
    // d/dp_k of 2N sum |p_i - mean|^2 is 4N (p_k - mean); the mean terms cancel.
    const double scale = sigma * 4.0 * n / (np * np);
    for (int k = 0; k < n; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      grad[uk] += scale * (rt.adjusted(k, deltas[uk]) - mean).dot(rt.rays()[uk]);
    }
  }
  const double dyn = 1.0 - sigma;
  if (dyn != 0.0) {
    for (const auto& s : rt.stencils()) {
      const auto a = static_cast<std::size_t>(s.prev);
      const auto b = static_cast<std::size_t>(s.center);
      const auto c = static_cast<std::size_t>(s.next);
      const double acc = s.base + s.prev_coef * deltas[a] + s.center_coef * deltas[b] +
                         s.next_coef * deltas[c];
      const double g = dyn * 2.0 * acc;
      grad[a] += g * s.prev_coef;
      grad[b] += g * s.center_coef;
      grad[c] += g * s.next_coef;
    }
  }
  for (int k = 0; k < n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const double x = deltas[uk] + rt.distances()[uk];
    const double diff = 1.0 / x - 1.0 / rt.distances()[uk];
    grad[uk] += -2.0 * lambda_reg * diff / (x * x);
  }
  return grad;
}

std::vector<double> analytic_gradient(const Track3D& track, const OffsetVector& deltas,
                                      const MotionMagnitude& m, const OptimizerConfig& cfg) {
  const RayTrack rt(track, cfg.windows);
  return analytic_gradient(rt, as_span(deltas), sigma_gate(m.m, cfg.m0), cfg.lambda_reg);
}

Track3D apply_offsets(const Track3D& track, const OffsetVector& offsets) {
  Track3D out = track;
  std::size_t k = 0;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (!out.visible[i]) continue;
    if (k >= offsets.deltas.size()) throw std::invalid_argument("apply_offsets: too few offsets");
    out.points[i] += offsets.deltas[k++] * (track.points[i] - track.camera_centers[i]).normalized();
  }
  if (k != offsets.deltas.size()) throw std::invalid_argument("apply_offsets: too many offsets");
  return out;
}

OptimizeResult optimize_track(const Track3D& track, const MotionMagnitude& m,
                              const OptimizerConfig& cfg) {
  cfg.validate();
  const RayTrack rt(track, cfg.windows);
  const int n = rt.size();
  if (n < 2) {
    throw std::invalid_argument("optimize_track: track " + std::to_string(track.track_id) +
                                " has fewer than 2 visible frames");
  }
  const auto un = static_cast<std::size_t>(n);
  const double sigma = sigma_gate(m.m, cfg.m0);

  std::vector<double> delta(un, 0.0);
  std::vector<double> mom1(un, 0.0);
  std::vector<double> mom2(un, 0.0);
  std::vector<double> lower(un);
  for (std::size_t k = 0; k < un; ++k) lower[k] = -(1.0 - cfg.min_depth_fraction) * rt.distances()[k];

  OptimizeResult res;
  res.sigma = sigma;
  res.loss_trace.reserve(static_cast<std::size_t>(cfg.steps) + 1);

  std::vector<double> best = delta;
  double best_value = std::numeric_limits<double>::infinity();
  int best_step = 0;
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  for (int step = 0; step <= cfg.steps; ++step) {
    const double value = evaluate_objective(rt, delta, sigma, cfg.lambda_reg).total;
    res.loss_trace.push_back(value);
    if (value < best_value) {
      best_value = value;
      best = delta;
      best_step = step;
    }
    if (step == cfg.steps) break;

    const std::vector<double> grad = analytic_gradient(rt, delta, sigma, cfg.lambda_reg);
    beta1_t *= cfg.beta1;
    beta2_t *= cfg.beta2;
    for (std::size_t k = 0; k < un; ++k) {
      mom1[k] = cfg.beta1 * mom1[k] + (1.0 - cfg.beta1) * grad[k];
      mom2[k] = cfg.beta2 * mom2[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
      const double m_hat = mom1[k] / (1.0 - beta1_t);
      const double v_hat = mom2[k] / (1.0 - beta2_t);
      delta[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      delta[k] = std::max(delta[k], lower[k]);
    }
  }

  res.initial_objective = res.loss_trace.front();
  if (res.loss_trace.back() <= res.initial_objective) {
    res.returned_objective = res.loss_trace.back();
    res.returned_step = cfg.steps;
  } else {
    res.warning = true;
    delta = best;
    res.returned_objective = best_value;
    res.returned_step = best_step;
  }
  res.offsets.deltas = std::move(delta);
  res.adjusted = apply_offsets(track, res.offsets);
  return res;
}

std::vector<OptimizeResult> optimize_tracks(std::span<const Track3D> tracks,
                                            std::span<const MotionMagnitude> magnitudes,
                                            const OptimizerConfig& cfg, int threads) {
  if (tracks.size() != magnitudes.size()) {
    throw std::invalid_argument("optimize_tracks: one motion magnitude per track required");
  }
  std::vector<OptimizeResult> out(tracks.size());
  parallel_for(tracks.size(), threads,
               [&](std::size_t i) { out[i] = optimize_track(tracks[i], magnitudes[i], cfg); });
  return out;
}

}  // namespace dynstereo
