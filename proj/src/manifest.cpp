#include "dynstereo/manifest.hpp"

#include <fstream>
#include <sstream>

#include "dynstereo/grid_io.hpp"

namespace dynstereo {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ManifestError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json mat_to_json(const Mat3& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
  }
  return out;
}

Mat3 mat_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw ManifestError("expected a row-major 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j[static_cast<std::size_t>(3 * r + c)].get<double>();
  }
  return m;
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

std::string relative_string(const fs::path& p, const fs::path& base) {
  if (p.empty()) return {};
  const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(
      fs::absolute(base).lexically_normal());
  return rel.empty() ? fs::absolute(p).generic_string() : rel.generic_string();
}

fs::path optional_path(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return {};
  return fs::path(j[key].get<std::string>());
}

}  // namespace

fs::path ClipManifest::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

void ClipManifest::validate() const {
  if (clip_id.empty()) throw ManifestError("manifest: empty clip_id");
  if (frame_count < 2) throw ManifestError("manifest " + clip_id + ": frame_count must be >= 2");
  if (!(frame_rate > 0.0)) throw ManifestError("manifest " + clip_id + ": frame_rate must be > 0");
  if (source_frame_count >= 0 && frame_start + frame_count > source_frame_count) {
    throw ManifestError("manifest " + clip_id + ": clip extends past the source video");
  }
  if (poses.empty()) throw ManifestError("manifest " + clip_id + ": no poses file");
  if (variants.empty()) throw ManifestError("manifest " + clip_id + ": no camera variants");
  for (const auto& v : variants) {
    if (v.disparity_dir.empty() == v.flow_dir.empty()) {
      throw ManifestError("manifest " + clip_id + ": variant " + v.name +
                          " needs exactly one of disparity_dir / flow_dir");
    }
    if (v.tracks.empty()) {
      throw ManifestError("manifest " + clip_id + ": variant " + v.name + " has no tracks");
    }
    v.camera.validate();
  }
  validate_rig(rig);
}

json camera_to_json(const CameraModel& model) {
  json j{{"kind", std::string(to_string(model.kind))},
         {"width", model.width},
         {"height", model.height}};
  switch (model.kind) {
    case CameraKind::kPerspective:
      j["focal"] = model.focal;
      j["principal_point"] = json::array({model.principal_point.x(), model.principal_point.y()});
      break;
    case CameraKind::kEquidistantFisheye:
      j["fov_h_deg"] = model.fov_h_deg;
      break;
    case CameraKind::kCroppedEquirectangular:
      j["yaw_deg"] = json::array({model.yaw_start_deg, model.yaw_end_deg});
      j["tilt_deg"] = json::array({model.tilt_start_deg, model.tilt_end_deg});
      break;
  }
  return j;
}

CameraModel camera_from_json(const json& j) {
  try {
    const CameraKind kind = camera_kind_from_string(j.at("kind").get<std::string>());
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    switch (kind) {
      case CameraKind::kPerspective: {
        if (j.contains("focal")) {
          std::optional<Vec2> pp;
          if (j.contains("principal_point")) {
            pp = Vec2(j["principal_point"][0].get<double>(), j["principal_point"][1].get<double>());
          }
          return CameraModel::perspective_from_focal(w, h, j["focal"].get<double>(), pp);
        }
        return CameraModel::perspective(w, h, j.at("fov_h_deg").get<double>());
      }
      case CameraKind::kEquidistantFisheye:
        return CameraModel::equidistant_fisheye(w, h, j.at("fov_h_deg").get<double>());
      case CameraKind::kCroppedEquirectangular: {
        const auto yaw = j.value("yaw_deg", json::array({-90.0, 90.0}));
        const auto tilt = j.value("tilt_deg", json::array({-90.0, 90.0}));
        return CameraModel::cropped_equirectangular(w, h, yaw[0].get<double>(),
                                                    yaw[1].get<double>(), tilt[0].get<double>(),
                                                    tilt[1].get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("camera: ") + e.what());
  }
  throw ManifestError("camera: unknown kind");
}

json rig_to_json(const RigCalibration& rig) {
  return {{"relative_position", vec_to_json(rig.relative_position)},
          {"relative_orientation", mat_to_json(rig.relative_orientation)},
          {"baseline_m", rig.baseline_m}};
}

RigCalibration rig_from_json(const json& j) {
  RigCalibration rig;
  if (j.contains("relative_position")) rig.relative_position = vec_from_json(j["relative_position"]);
  if (j.contains("relative_orientation")) {
    rig.relative_orientation = mat_from_json(j["relative_orientation"]);
  }
  rig.baseline_m = j.value("baseline_m", rig.relative_position.norm());
  return rig;
}

ClipManifest load_manifest(const fs::path& path) {
  const json j = read_json(path);
  ClipManifest m;
  m.base_dir = path.parent_path();
  try {
    m.clip_id = j.at("clip_id").get<std::string>();
    m.frame_start = j.value("frame_start", 0);
    m.frame_count = j.at("frame_count").get<int>();
    m.frame_rate = j.value("frame_rate", 30.0);
    m.source_frame_count = j.value("source_frame_count", -1);
    m.poses = j.at("poses").get<std::string>();
    if (j.contains("rig")) m.rig = rig_from_json(j["rig"]);
    for (const json& v : j.at("variants")) {
      VariantManifest vm;
      vm.name = v.at("name").get<std::string>();
      vm.camera = camera_from_json(v.at("camera"));
      vm.disparity_dir = optional_path(v, "disparity_dir");
      vm.flow_dir = optional_path(v, "flow_dir");
      vm.tracks = v.at("tracks").get<std::string>();
      vm.labels_dir = optional_path(v, "labels_dir");
      m.variants.push_back(std::move(vm));
    }
    m.match_counts = optional_path(j, "match_counts");
    m.frames_dir = optional_path(j, "frames_dir");
    m.class_names = optional_path(j, "class_names");
  } catch (const json::exception& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const ClipManifest& m, const fs::path& path) {
  const fs::path base = path.parent_path();
  // Paths of a loaded manifest are relative to its own directory.
  const auto rel = [&](const fs::path& p) { return relative_string(m.resolve(p), base); };
  json variants = json::array();
  for (const auto& v : m.variants) {
    json jv{{"name", v.name},
            {"camera", camera_to_json(v.camera)},
            {"tracks", rel(v.tracks)}};
    if (!v.disparity_dir.empty()) jv["disparity_dir"] = rel(v.disparity_dir);
    if (!v.flow_dir.empty()) jv["flow_dir"] = rel(v.flow_dir);
    if (!v.labels_dir.empty()) jv["labels_dir"] = rel(v.labels_dir);
    variants.push_back(std::move(jv));
  }
  json j{{"clip_id", m.clip_id},
         {"frame_start", m.frame_start},
         {"frame_count", m.frame_count},
         {"frame_rate", m.frame_rate},
         {"source_frame_count", m.source_frame_count},
         {"poses", rel(m.poses)},
         {"rig", rig_to_json(m.rig)},
         {"variants", std::move(variants)}};
  if (!m.match_counts.empty()) j["match_counts"] = rel(m.match_counts);
  if (!m.frames_dir.empty()) j["frames_dir"] = rel(m.frames_dir);
  if (!m.class_names.empty()) j["class_names"] = rel(m.class_names);
  write_json(path, j);
}

std::vector<CameraPose> load_poses(const fs::path& path) {
  const json j = read_json(path);
  if (!j.is_array()) throw IoError(path.string() + ": expected an array of poses");
  std::vector<CameraPose> poses;
  poses.reserve(j.size());
  try {
    for (const json& p : j) {
      CameraPose pose;
      pose.frame_index = p.at("frame_index").get<int>();
      pose.position = vec_from_json(p.at("position"));
      pose.orientation = mat_from_json(p.at("orientation"));
      poses.push_back(pose);
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const ManifestError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return poses;
}

void save_poses(const fs::path& path, const std::vector<CameraPose>& poses) {
  json j = json::array();
  for (const CameraPose& p : poses) {
    j.push_back({{"frame_index", p.frame_index},
                 {"position", vec_to_json(p.position)},
                 {"orientation", mat_to_json(p.orientation)}});
  }
  write_json(path, j);
}

MatchCountSeries load_match_counts(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  MatchCountSeries s;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line_no == 1) continue;
    std::istringstream ls(line);
    FramePairCount p;
    char c1 = 0;
    char c2 = 0;
    if (!(ls >> p.frame_a >> c1 >> p.frame_b >> c2 >> p.count) || c1 != ',' || c2 != ',') {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    s.pairs.push_back(p);
  }
  if (!s.pairs.empty()) s.gap = s.pairs.front().frame_b - s.pairs.front().frame_a;
  return s;
}

void save_match_counts(const fs::path& path, const MatchCountSeries& series) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "frame_a,frame_b,count\n";
  for (const auto& p : series.pairs) os << p.frame_a << ',' << p.frame_b << ',' << p.count << '\n';
}

std::vector<std::string> load_class_names(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    names.push_back(line);
  }
  return names;
}

}  // namespace dynstereo
