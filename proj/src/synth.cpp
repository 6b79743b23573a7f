#include "dynstereo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Geometry>

#include "dynstereo/grid_io.hpp"
#include "dynstereo/manifest.hpp"
#include "dynstereo/rng.hpp"
#include "dynstereo/track_io.hpp"

namespace dynstereo {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kDegToRad = std::numbers::pi / 180.0;

// Noise channels of the counter-based generator.
constexpr std::uint64_t kDisparityChannel = 1;
constexpr std::uint64_t kTrackChannel = 2;
constexpr std::uint64_t kSceneChannel = 3;

std::uint64_t stream_key(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d = 0) {
  std::uint64_t h = CounterRng::mix(a);
  h = CounterRng::mix(h ^ b);
  h = CounterRng::mix(h ^ c);
  return CounterRng::mix(h ^ d);
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

std::string_view motion_name(MotionKind k) {
  switch (k) {
    case MotionKind::kLinear:
      return "linear";
    case MotionKind::kSinusoid:
      return "sinusoid";
    case MotionKind::kPiecewise:
      return "piecewise";
  }
  return "linear";
}

MotionKind motion_from_name(const std::string& s) {
  if (s == "linear") return MotionKind::kLinear;
  if (s == "sinusoid") return MotionKind::kSinusoid;
  if (s == "piecewise") return MotionKind::kPiecewise;
  throw std::invalid_argument("unknown motion kind: " + s);
}

CameraModel variant_model(const SceneSpec& spec, const VariantSpec& v) {
  if (v.focal_px > 0.0) {
    return CameraModel::perspective_from_focal(spec.image_width, spec.image_height, v.focal_px);
  }
  return CameraModel::perspective(spec.image_width, spec.image_height, v.fov_h_deg);
}

double ray_energy(const Track3D& track, std::span<const Vec3> rays, std::span<const int> windows) {
  const int n = track.num_frames();
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (!track.visible[ui]) continue;
    for (int w : windows) {
      if (i - w < 0 || i + w >= n) continue;
      const auto a = static_cast<std::size_t>(i - w);
      const auto c = static_cast<std::size_t>(i + w);
      if (!track.visible[a] || !track.visible[c]) continue;
      const double l = (track.points[c] - 2.0 * track.points[ui] + track.points[a]).dot(rays[ui]);
      e += l * l;
    }
  }
  return e;
}

}  // namespace

Vec3 MovingPoint::position(double t) const {
  switch (kind) {
    case MotionKind::kLinear:
      return start + velocity * t;
    case MotionKind::kSinusoid: {
      const double w = 2.0 * std::numbers::pi * frequency_hz * t;
      return start + Vec3(amplitude.x() * std::sin(w + phase.x()),
                          amplitude.y() * std::sin(w + phase.y()),
                          amplitude.z() * std::sin(w + phase.z()));
    }
    case MotionKind::kPiecewise: {
      if (waypoints.empty()) return start;
      if (t <= waypoint_times.front()) return waypoints.front();
      if (t >= waypoint_times.back()) return waypoints.back();
      const auto it = std::upper_bound(waypoint_times.begin(), waypoint_times.end(), t);
      const auto k = static_cast<std::size_t>(it - waypoint_times.begin());
      const double t0 = waypoint_times[k - 1];
      const double t1 = waypoint_times[k];
      const double a = (t - t0) / (t1 - t0);
      return (1.0 - a) * waypoints[k - 1] + a * waypoints[k];
    }
  }
  return start;
}

CameraPose CameraPath::pose_at(int frame, double fps) const {
  const double t = frame / fps;
  CameraPose pose;
  pose.frame_index = frame;
  const double s = std::sin(2.0 * std::numbers::pi * sway_frequency_hz * t);
  pose.position = start + velocity * t + sway_amplitude * s;
  const double yaw = (yaw_deg + yaw_rate_deg_per_s * t) * kDegToRad;
  pose.orientation = (Eigen::AngleAxisd(yaw, Vec3::UnitY()) *
                      Eigen::AngleAxisd(pitch_deg * kDegToRad, Vec3::UnitX()))
                         .toRotationMatrix();
  return pose;
}

void SceneSpec::validate() const {
  if (frames < 2) throw std::invalid_argument("SceneSpec: frames must be >= 2");
  if (!(fps > 0.0)) throw std::invalid_argument("SceneSpec: fps must be > 0");
  if (!(noise.disparity_std_px >= 0.0) || !(noise.track_std_px >= 0.0)) {
    throw std::invalid_argument("SceneSpec: noise stds must be >= 0");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw std::invalid_argument("SceneSpec: image size must be positive");
  }
  if (variants.empty()) throw std::invalid_argument("SceneSpec: no variants");
  if (patch_radius < 1) throw std::invalid_argument("SceneSpec: patch_radius must be >= 1");
  if (requery_every < 0) throw std::invalid_argument("SceneSpec: requery_every must be >= 0");
  for (const auto& m : moving_points) {
    if (m.kind == MotionKind::kPiecewise) {
      if (m.waypoints.empty() || m.waypoints.size() != m.waypoint_times.size()) {
        throw std::invalid_argument("SceneSpec: piecewise motion needs matching waypoints/times");
      }
      if (!std::is_sorted(m.waypoint_times.begin(), m.waypoint_times.end()) ||
          std::adjacent_find(m.waypoint_times.begin(), m.waypoint_times.end()) !=
              m.waypoint_times.end()) {
        throw std::invalid_argument("SceneSpec: waypoint times must increase");
      }
    }
  }
  validate_rig(rig);
}

json scene_to_json(const SceneSpec& s) {
  json statics = json::array();
  for (const Vec3& p : s.static_points) statics.push_back(vec_json(p));
  json moving = json::array();
  for (const MovingPoint& m : s.moving_points) {
    json jm{{"start", vec_json(m.start)}, {"motion", std::string(motion_name(m.kind))}};
    json params;
    switch (m.kind) {
      case MotionKind::kLinear:
        params["velocity"] = vec_json(m.velocity);
        break;
      case MotionKind::kSinusoid:
        params["amplitude"] = vec_json(m.amplitude);
        params["frequency_hz"] = m.frequency_hz;
        params["phase"] = vec_json(m.phase);
        break;
      case MotionKind::kPiecewise: {
        json wp = json::array();
        for (const Vec3& w : m.waypoints) wp.push_back(vec_json(w));
        params["waypoints"] = std::move(wp);
        params["times"] = m.waypoint_times;
        break;
      }
    }
    jm["params"] = std::move(params);
    moving.push_back(std::move(jm));
  }
  json variants = json::array();
  for (const auto& v : s.variants) {
    variants.push_back({{"name", v.name}, {"fov_h_deg", v.fov_h_deg}, {"focal_px", v.focal_px}});
  }
  return {{"static_points", std::move(statics)},
          {"moving_points", std::move(moving)},
          {"camera",
           {{"start", vec_json(s.camera.start)},
            {"velocity", vec_json(s.camera.velocity)},
            {"sway_amplitude", vec_json(s.camera.sway_amplitude)},
            {"sway_frequency_hz", s.camera.sway_frequency_hz},
            {"yaw_deg", s.camera.yaw_deg},
            {"yaw_rate_deg_per_s", s.camera.yaw_rate_deg_per_s},
            {"pitch_deg", s.camera.pitch_deg}}},
          {"frames", s.frames},
          {"fps", s.fps},
          {"noise",
           {{"disparity_std_px", s.noise.disparity_std_px},
            {"track_std_px", s.noise.track_std_px},
            {"seed", s.noise.seed}}},
          {"image_width", s.image_width},
          {"image_height", s.image_height},
          {"variants", std::move(variants)},
          {"rig", rig_to_json(s.rig)},
          {"patch_radius", s.patch_radius},
          {"requery_every", s.requery_every}};
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  try {
    for (const json& p : j.value("static_points", json::array())) s.static_points.push_back(vec_from(p));
    for (const json& jm : j.value("moving_points", json::array())) {
      MovingPoint m;
      m.start = vec_from(jm.at("start"));
      m.kind = motion_from_name(jm.at("motion").get<std::string>());
      const json params = jm.value("params", json::object());
      if (params.contains("velocity")) m.velocity = vec_from(params["velocity"]);
      if (params.contains("amplitude")) m.amplitude = vec_from(params["amplitude"]);
      m.frequency_hz = params.value("frequency_hz", 0.0);
      if (params.contains("phase")) m.phase = vec_from(params["phase"]);
      for (const json& w : params.value("waypoints", json::array())) m.waypoints.push_back(vec_from(w));
      m.waypoint_times = params.value("times", std::vector<double>{});
      s.moving_points.push_back(std::move(m));
    }
    if (j.contains("camera")) {
      const json& c = j["camera"];
      if (c.contains("start")) s.camera.start = vec_from(c["start"]);
      if (c.contains("velocity")) s.camera.velocity = vec_from(c["velocity"]);
      if (c.contains("sway_amplitude")) s.camera.sway_amplitude = vec_from(c["sway_amplitude"]);
      s.camera.sway_frequency_hz = c.value("sway_frequency_hz", 0.0);
      s.camera.yaw_deg = c.value("yaw_deg", 0.0);
      s.camera.yaw_rate_deg_per_s = c.value("yaw_rate_deg_per_s", 0.0);
      s.camera.pitch_deg = c.value("pitch_deg", 0.0);
    }
    s.frames = j.value("frames", s.frames);
    s.fps = j.value("fps", s.fps);
    if (j.contains("noise")) {
      const json& n = j["noise"];
      s.noise.disparity_std_px = n.value("disparity_std_px", 0.0);
      s.noise.track_std_px = n.value("track_std_px", 0.0);
      s.noise.seed = n.value("seed", std::uint64_t{0});
    }
    s.image_width = j.value("image_width", s.image_width);
    s.image_height = j.value("image_height", s.image_height);
    if (j.contains("variants")) {
      s.variants.clear();
      for (const json& v : j["variants"]) {
        s.variants.push_back({v.at("name").get<std::string>(), v.value("fov_h_deg", 60.0),
                              v.value("focal_px", 0.0)});
      }
    }
    if (j.contains("rig")) s.rig = rig_from_json(j["rig"]);
    s.patch_radius = j.value("patch_radius", s.patch_radius);
    s.requery_every = j.value("requery_every", s.requery_every);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("SceneSpec: ") + e.what());
  }
  s.validate();
  return s;
}

Track3D GroundTruthBundle::truth_track(const Track2D& track) const {
  const auto it = point_of_track.find(track.track_id);
  if (it == point_of_track.end()) {
    throw std::invalid_argument("truth_track: unknown track id " + std::to_string(track.track_id));
  }
  const auto& traj = trajectories[static_cast<std::size_t>(it->second)];
  Track3D t;
  t.track_id = track.track_id;
  t.query_frame = track.query_frame;
  const auto n = track.positions.size();
  t.points.assign(n, Vec3::Constant(kNan));
  t.visible = track.visible;
  t.camera_centers.assign(n, Vec3::Constant(kNan));
  t.pixels = track.positions;
  for (std::size_t i = 0; i < n; ++i) {
    if (!t.visible[i]) continue;
    t.points[i] = traj[i];
    t.camera_centers[i] = poses[i].position;
  }
  t.refresh_rays();
  return t;
}

GroundTruthBundle render_scene(const SceneSpec& spec) {
  spec.validate();
  const int n = spec.frames;
  const std::size_t np = spec.point_count();
  const CounterRng root(spec.noise.seed);

  GroundTruthBundle b;
  b.rig = spec.rig;
  b.fps = spec.fps;
  for (int i = 0; i < n; ++i) b.poses.push_back(spec.camera.pose_at(i, spec.fps));
  b.trajectories.resize(np);
  b.point_is_static.assign(np, 0);
  for (std::size_t j = 0; j < spec.static_points.size(); ++j) {
    b.trajectories[j].assign(static_cast<std::size_t>(n), spec.static_points[j]);
    b.point_is_static[j] = 1;
  }
  for (std::size_t k = 0; k < spec.moving_points.size(); ++k) {
    auto& traj = b.trajectories[spec.static_points.size() + k];
    traj.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) traj[static_cast<std::size_t>(i)] = spec.moving_points[k].position(i / spec.fps);
  }

  const int margin = spec.patch_radius + 1;
  std::uint32_t next_id = 0;
  for (std::size_t v = 0; v < spec.variants.size(); ++v) {
    RenderedVariant rv;
    rv.name = spec.variants[v].name;
    rv.model = variant_model(spec, spec.variants[v]);
    const double bf = spec.rig.baseline_m * rv.model.focal;

    // True projections; visible when in front and clear of the border.
    std::vector<std::vector<Vec2>> proj(np, std::vector<Vec2>(static_cast<std::size_t>(n)));
    std::vector<std::vector<std::uint8_t>> vis(np, std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
    std::vector<std::vector<double>> zc(np, std::vector<double>(static_cast<std::size_t>(n), kNan));
    for (std::size_t j = 0; j < np; ++j) {
      for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Vec3 cam = b.poses[ui].to_camera(b.trajectories[j][ui]);
        if (!(cam.z() > 0.0)) continue;
        const Projection p = project_camera_ray(cam, rv.model);
        if (!p.in_front) continue;
        const Vec2 uv = p.pixel.uv();
        if (uv.x() < margin || uv.y() < margin || uv.x() > rv.model.width - margin ||
            uv.y() > rv.model.height - margin) {
          continue;
        }
        proj[j][ui] = uv;
        vis[j][ui] = 1;
        zc[j][ui] = cam.z();
      }
    }

    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      DisparityMap dm;
      dm.frame_index = i;
      dm.disparity = ImageGrid(rv.model.width, rv.model.height, kNan);
      dm.valid = Mask(rv.model.width, rv.model.height, 0);
      Grid<int> owner(rv.model.width, rv.model.height, -1);
      Mask conflict(rv.model.width, rv.model.height, 0);
      for (std::size_t j = 0; j < np; ++j) {
        if (!vis[j][ui]) continue;
        const CounterRng rng = root.substream(stream_key(kDisparityChannel, v, j));
        const double d = bf / zc[j][ui] + spec.noise.disparity_std_px * rng.normal(ui);
        if (!std::isfinite(d) || !(d > 0.0)) continue;
        const int cx = static_cast<int>(std::lround(proj[j][ui].x()));
        const int cy = static_cast<int>(std::lround(proj[j][ui].y()));
        for (int y = cy - spec.patch_radius; y <= cy + spec.patch_radius; ++y) {
          for (int x = cx - spec.patch_radius; x <= cx + spec.patch_radius; ++x) {
            if (!owner.contains(x, y)) continue;
            if (owner(x, y) < 0) {
              owner(x, y) = static_cast<int>(j);
              dm.disparity(x, y) = d;
              dm.valid(x, y) = 1;
            } else if (owner(x, y) != static_cast<int>(j)) {
              conflict(x, y) = 1;
            }
          }
        }
      }
      for (std::size_t k = 0; k < conflict.size(); ++k) {
        if (conflict.data()[k]) {
          dm.valid.data()[k] = 0;
          dm.disparity.data()[k] = kNan;
        }
      }
      rv.disparity.push_back(std::move(dm));
    }

    for (std::size_t j = 0; j < np; ++j) {
      const auto first = std::find(vis[j].begin(), vis[j].end(), std::uint8_t{1});
      const auto count = std::count(vis[j].begin(), vis[j].end(), std::uint8_t{1});
      if (first == vis[j].end() || count < 2) continue;
      const int q0 = static_cast<int>(first - vis[j].begin());
      std::vector<int> queries{q0};
      if (spec.requery_every > 0) {
        for (int q = q0 + spec.requery_every; q < n; q += spec.requery_every) {
          if (!vis[j][static_cast<std::size_t>(q)]) break;
          queries.push_back(q);
        }
      }
      for (std::size_t k = 0; k < queries.size(); ++k) {
        const CounterRng rng = root.substream(stream_key(kTrackChannel, v, j, k));
        Track2D t;
        t.track_id = next_id++;
        t.query_frame = queries[k];
        t.visible = vis[j];
        t.positions.assign(static_cast<std::size_t>(n), Vec2::Constant(kNan));
        for (int i = 0; i < n; ++i) {
          const auto ui = static_cast<std::size_t>(i);
          if (!vis[j][ui]) continue;
          t.positions[ui] = proj[j][ui] + spec.noise.track_std_px *
                                              Vec2(rng.normal(2 * ui), rng.normal(2 * ui + 1));
        }
        b.point_of_track[t.track_id] = static_cast<int>(j);
        rv.tracks.push_back(std::move(t));
      }
    }
    b.variants.push_back(std::move(rv));
  }
  return b;
}

SceneSpec standard_scene(const StandardSceneOptions& o) {
  SceneSpec s;
  s.frames = o.frames;
  s.fps = o.fps;
  s.image_width = o.image_size;
  s.image_height = o.image_size;
  s.noise = {o.disparity_std_px, o.track_std_px, o.seed};
  if (o.moving_camera) {
    s.camera.velocity = Vec3(0.1, 0.0, 0.05);
    s.camera.yaw_rate_deg_per_s = 2.0;
    s.camera.sway_amplitude = Vec3(0.01, 0.005, 0.0);
    s.camera.sway_frequency_hz = 1.0;
  }
  const CounterRng rng = CounterRng(o.seed).substream(kSceneChannel);
  std::uint64_t c = 0;
  // Draws are taken one statement at a time so the counter order is fixed.
  auto draw = [&](double lo, double hi) { return rng.uniform(c++, lo, hi); };
  auto draw3 = [&](const Vec3& lo, const Vec3& hi) {
    const double x = draw(lo.x(), hi.x());
    const double y = draw(lo.y(), hi.y());
    const double z = draw(lo.z(), hi.z());
    return Vec3(x, y, z);
  };
  // Inside 80% of the narrow variant's half-angle at frame 0.
  const double half = 0.8 * std::tan(30.0 * kDegToRad);
  auto sample_point = [&](double zmin, double zmax) {
    const double z = draw(zmin, zmax);
    const double x = draw(-half, half) * z;
    const double y = draw(-half, half) * z;
    return Vec3(x, y, z);
  };
  for (int k = 0; k < o.static_points; ++k) s.static_points.push_back(sample_point(o.min_depth_m, o.max_depth_m));
  const double span = o.max_depth_m - o.min_depth_m;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < o.moving_points; ++k) {
    MovingPoint m;
    m.kind = o.moving_kind;
    m.start = sample_point(o.min_depth_m + 0.25 * span, o.max_depth_m - 0.25 * span);
    const Vec3 flip(draw(0.0, 1.0) < 0.5 ? -1.0 : 1.0, 1.0, 1.0);
    switch (m.kind) {
      case MotionKind::kLinear:
        m.velocity = flip.cwiseProduct(draw3(Vec3(0.3, -0.1, -0.2), Vec3(0.6, 0.1, 0.2)));
        break;
      case MotionKind::kSinusoid:
        m.amplitude = flip.cwiseProduct(draw3(Vec3(0.3, 0.05, 0.1), Vec3(0.5, 0.15, 0.3)));
        m.frequency_hz = draw(0.3, 0.6);
        m.phase = draw3(Vec3::Zero(), Vec3::Constant(two_pi));
        break;
      case MotionKind::kPiecewise: {
        const double duration = (o.frames - 1) / o.fps;
        Vec3 p = m.start;
        for (int w = 0; w < 4; ++w) {
          m.waypoints.push_back(p);
          m.waypoint_times.push_back(duration * w / 3.0);
          p += flip.cwiseProduct(draw3(Vec3(0.2, -0.1, -0.2), Vec3(0.5, 0.1, 0.2)));
        }
        break;
      }
    }
    s.moving_points.push_back(std::move(m));
  }
  return s;
}

TruthTable truth_table(const GroundTruthBundle& bundle) {
  TruthTable t;
  for (const auto& [id, point] : bundle.point_of_track) {
    const auto p = static_cast<std::size_t>(point);
    t[id] = {bundle.trajectories[p], bundle.point_is_static[p] != 0, point};
  }
  return t;
}

DenoiseReport evaluate_denoising(const TruthTable& truth, std::span<const Track3D> lifted,
                                 std::span<const Track3D> optimized) {
  if (lifted.size() != optimized.size()) {
    throw std::invalid_argument("evaluate_denoising: track counts differ");
  }
  std::unordered_map<std::uint32_t, const Track3D*> post;
  for (const Track3D& t : optimized) {
    if (!post.emplace(t.track_id, &t).second) {
      throw std::invalid_argument("evaluate_denoising: duplicate id " + std::to_string(t.track_id));
    }
  }
  static constexpr int kWindows[] = {1, 3, 5};
  DenoiseReport r;
  double sum_std_pre = 0.0, sum_std_post = 0.0, s_rmse_pre = 0.0, s_rmse_post = 0.0;
  double d_rmse_pre = 0.0, d_rmse_post = 0.0;
  std::size_t d_rmse_better = 0, d_accel_better = 0;
  for (const Track3D& pre : lifted) {
    const auto it = post.find(pre.track_id);
    const auto tt = truth.find(pre.track_id);
    if (it == post.end() || tt == truth.end()) {
      throw std::invalid_argument("evaluate_denoising: id mismatch for track " +
                                  std::to_string(pre.track_id));
    }
    const Track3D& opt = *it->second;
    if (opt.num_frames() != pre.num_frames()) {
      throw std::invalid_argument("evaluate_denoising: frame counts differ for track " +
                                  std::to_string(pre.track_id));
    }
    const auto& traj = tt->second.trajectory;
    TrackDenoiseRecord rec;
    rec.track_id = pre.track_id;
    rec.point = tt->second.point;
    rec.is_static = tt->second.is_static;

    Track3D pre_v = pre;
    Track3D opt_v = opt;
    std::vector<Vec3> rays(pre.points.size(), Vec3::Constant(kNan));
    Vec3 c_pre = Vec3::Zero(), c_post = Vec3::Zero();
    double e_pre = 0.0, e_post = 0.0;
    for (std::size_t i = 0; i < pre.points.size(); ++i) {
      const bool use = pre.visible[i] && opt.visible[i] && i < traj.size();
      pre_v.visible[i] = opt_v.visible[i] = use ? 1 : 0;
      if (!use) continue;
      ++rec.frames;
      e_pre += (pre.points[i] - traj[i]).squaredNorm();
      e_post += (opt.points[i] - traj[i]).squaredNorm();
      c_pre += pre.points[i];
      c_post += opt.points[i];
      rays[i] = i < pre.camera_centers.size() && pre.camera_centers[i].allFinite()
                    ? (pre.points[i] - pre.camera_centers[i]).normalized()
                    : (i < pre.rays.size() ? pre.rays[i] : Vec3::Constant(kNan));
      if (!rays[i].allFinite()) {
        throw std::invalid_argument("evaluate_denoising: track " + std::to_string(pre.track_id) +
                                    " has no camera centers or rays");
      }
    }
    if (rec.frames == 0) {
      r.records.push_back(rec);
      continue;
    }
    const double nf = rec.frames;
    rec.rmse_pre = std::sqrt(e_pre / nf);
    rec.rmse_post = std::sqrt(e_post / nf);
    c_pre /= nf;
    c_post /= nf;
    double v_pre = 0.0, v_post = 0.0;
    for (std::size_t i = 0; i < pre.points.size(); ++i) {
      if (!pre_v.visible[i]) continue;
      v_pre += (pre.points[i] - c_pre).squaredNorm();
      v_post += (opt.points[i] - c_post).squaredNorm();
    }
    rec.std_pre = std::sqrt(v_pre / nf);
    rec.std_post = std::sqrt(v_post / nf);
    rec.accel_pre = ray_energy(pre_v, rays, kWindows);
    rec.accel_post = ray_energy(opt_v, rays, kWindows);

    if (rec.is_static) {
      ++r.static_tracks;
      sum_std_pre += rec.std_pre;
      sum_std_post += rec.std_post;
      s_rmse_pre += rec.rmse_pre;
      s_rmse_post += rec.rmse_post;
    } else {
      ++r.dynamic_tracks;
      d_rmse_pre += rec.rmse_pre;
      d_rmse_post += rec.rmse_post;
      if (rec.rmse_post < rec.rmse_pre) ++d_rmse_better;
      if (rec.accel_post < rec.accel_pre) ++d_accel_better;
    }
    r.records.push_back(rec);
  }
  if (r.static_tracks > 0) {
    const double ns = static_cast<double>(r.static_tracks);
    r.static_std_pre = sum_std_pre / ns;
    r.static_std_post = sum_std_post / ns;
    r.static_rmse_pre = s_rmse_pre / ns;
    r.static_rmse_post = s_rmse_post / ns;
    r.static_jitter_ratio = r.static_std_post > 0.0
                                ? r.static_std_pre / r.static_std_post
                                : std::numeric_limits<double>::infinity();
  }
  if (r.dynamic_tracks > 0) {
    const double nd = static_cast<double>(r.dynamic_tracks);
    r.dynamic_rmse_pre = d_rmse_pre / nd;
    r.dynamic_rmse_post = d_rmse_post / nd;
    r.dynamic_fraction_rmse_improved = static_cast<double>(d_rmse_better) / nd;
    r.dynamic_fraction_accel_improved = static_cast<double>(d_accel_better) / nd;
  }
  return r;
}

DenoiseReport evaluate_denoising(const GroundTruthBundle& bundle, std::span<const Track3D> lifted,
                                 std::span<const Track3D> optimized) {
  return evaluate_denoising(truth_table(bundle), lifted, optimized);
}

json DenoiseReport::to_json() const {
  return {{"static_tracks", static_tracks},
          {"dynamic_tracks", dynamic_tracks},
          {"static_rmse_pre", static_rmse_pre},
          {"static_rmse_post", static_rmse_post},
          {"static_std_pre", static_std_pre},
          {"static_std_post", static_std_post},
          {"static_jitter_ratio", static_jitter_ratio},
          {"dynamic_rmse_pre", dynamic_rmse_pre},
          {"dynamic_rmse_post", dynamic_rmse_post},
          {"dynamic_fraction_rmse_improved", dynamic_fraction_rmse_improved},
          {"dynamic_fraction_accel_improved", dynamic_fraction_accel_improved}};
}

fs::path write_bundle(const GroundTruthBundle& bundle, const fs::path& dir,
                      const std::string& clip_id) {
  fs::create_directories(dir);
  ClipManifest m;
  m.clip_id = clip_id;
  m.frame_count = bundle.frame_count();
  m.frame_rate = bundle.fps;
  m.poses = dir / "poses.json";
  m.rig = bundle.rig;
  save_poses(m.poses, bundle.poses);

  std::vector<Track3D> truth;
  for (const RenderedVariant& v : bundle.variants) {
    VariantManifest vm;
    vm.name = v.name;
    vm.camera = v.model;
    vm.disparity_dir = dir / ("disparity_" + v.name);
    vm.tracks = dir / ("tracks_" + v.name + ".trk");
    fs::create_directories(vm.disparity_dir);
    for (const DisparityMap& d : v.disparity) {
      write_disparity(vm.disparity_dir / frame_file_name(d.frame_index), d);
    }
    write_tracks2d(vm.tracks, v.tracks, m.frame_count);
    for (const Track2D& t : v.tracks) truth.push_back(bundle.truth_track(t));
    m.variants.push_back(std::move(vm));
  }
  write_tracks3d(dir / "truth_tracks3d.trk", truth, m.frame_count);
  {
    std::ofstream os(dir / "truth_points.csv");
    if (!os) throw IoError("cannot write " + (dir / "truth_points.csv").string());
    os << "track_id,point,is_static\n";
    for (const auto& [id, point] : bundle.point_of_track) {
      os << id << ',' << point << ',' << int(bundle.point_is_static[static_cast<std::size_t>(point)])
         << '\n';
    }
  }
  const fs::path manifest = dir / "manifest.json";
  save_manifest(m, manifest);
  return manifest;
}

TruthTable read_truth(const fs::path& dir) {
  const auto tracks = read_tracks3d(dir / "truth_tracks3d.trk");
  std::ifstream is(dir / "truth_points.csv");
  if (!is) throw IoError("cannot open " + (dir / "truth_points.csv").string());
  std::unordered_map<std::uint32_t, std::pair<int, bool>> meta;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::uint32_t id = 0;
    int point = 0, is_static = 0;
    char c1 = 0, c2 = 0;
    if (!(ls >> id >> c1 >> point >> c2 >> is_static)) {
      throw IoError("malformed row in truth_points.csv: " + line);
    }
    meta[id] = {point, is_static != 0};
  }
  TruthTable t;
  for (const Track3D& tr : tracks) {
    const auto it = meta.find(tr.track_id);
    if (it == meta.end()) throw IoError("truth_points.csv lacks track " + std::to_string(tr.track_id));
    t[tr.track_id] = {tr.points, it->second.second, it->second.first};
  }
  return t;
}

}  // namespace dynstereo
