#include "dynstereo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace dynstereo {

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

SceneFlowMetrics eval_metrics(std::span<const Track3D> pred, std::span<const Track3D> truth,
                              int frame_a, int frame_b, const CameraPose& reference) {
  if (frame_a < 0 || frame_b < 0) throw std::invalid_argument("eval_metrics: negative frame");
  std::unordered_map<std::uint32_t, const Track3D*> by_id;
  for (const Track3D& t : truth) by_id.emplace(t.track_id, &t);

  const auto fa = static_cast<std::size_t>(frame_a);
  const auto fb = static_cast<std::size_t>(frame_b);
  auto visible_at = [](const Track3D& t, std::size_t i) {
    return i < t.visible.size() && t.visible[i] && t.points[i].allFinite();
  };

  struct Pair {
    Vec3 p;
    Vec3 t;
  };
  std::vector<Pair> points_a;
  std::vector<Pair> points;
  std::vector<std::pair<Vec3, Vec3>> flows;  // (pred flow, true flow), unscaled
  for (const Track3D& p : pred) {
    const auto it = by_id.find(p.track_id);
    if (it == by_id.end()) continue;
    const Track3D& t = *it->second;
    const bool a = visible_at(p, fa) && visible_at(t, fa);
    const bool b = visible_at(p, fb) && visible_at(t, fb);
    if (a) {
      points_a.push_back({reference.to_camera(p.points[fa]), reference.to_camera(t.points[fa])});
      points.push_back(points_a.back());
    }
    if (b && fb != fa) points.push_back({reference.to_camera(p.points[fb]), reference.to_camera(t.points[fb])});
    if (a && b) {
      flows.emplace_back(reference.orientation.transpose() * (p.points[fb] - p.points[fa]),
                         reference.orientation.transpose() * (t.points[fb] - t.points[fa]));
    }
  }
  if (points_a.empty()) throw std::invalid_argument("eval_metrics: no matched points at frame_a");

  std::vector<double> ratios;
  for (const Pair& q : points_a) {
    const double np = q.p.norm();
    if (np > 0.0) ratios.push_back(q.t.norm() / np);
  }
  if (ratios.empty()) throw std::invalid_argument("eval_metrics: degenerate predictions");

  SceneFlowMetrics m;
  m.scale = median(std::move(ratios));
  m.matched_flows = flows.size();
  if (!flows.empty()) {
    double sum = 0.0;
    std::size_t in5 = 0, in10 = 0;
    for (const auto& [fp, ft] : flows) {
      const double e = (m.scale * fp - ft).norm();
      sum += e;
      if (e < 0.05) ++in5;
      if (e < 0.10) ++in10;
    }
    const double n = static_cast<double>(flows.size());
    m.epe3d = sum / n;
    m.delta_005 = 100.0 * static_cast<double>(in5) / n;
    m.delta_010 = 100.0 * static_cast<double>(in10) / n;
  }
  double rel = 0.0;
  std::size_t good = 0;
  for (const Pair& q : points) {
    const double zt = q.t.z();
    const double zp = m.scale * q.p.z();
    if (!(zt > 0.0)) continue;
    ++m.matched_points;
    rel += std::abs(zp - zt) / zt;
    if (zp > 0.0 && std::max(zp / zt, zt / zp) < 1.25) ++good;
  }
  if (m.matched_points > 0) {
    const double n = static_cast<double>(m.matched_points);
    m.abs_rel = rel / n;
    m.delta_125 = 100.0 * static_cast<double>(good) / n;
  }
  return m;
}

nlohmann::json SceneFlowMetrics::to_json() const {
  return {{"epe3d", epe3d},         {"delta_0.05", delta_005},       {"delta_0.10", delta_010},
          {"abs_rel", abs_rel},     {"delta_1.25", delta_125},       {"scale", scale},
          {"matched_flows", matched_flows}, {"matched_points", matched_points}};
}

}  // namespace dynstereo
