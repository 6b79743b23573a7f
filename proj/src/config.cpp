#include "dynstereo/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dynstereo/parallel.hpp"

namespace dynstereo {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + s + "'");
}

int parse_int(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string s = trim(v);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + s + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::string s = trim(v);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated list: " + s);
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Entry {
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define DS_DOUBLE(path)                                                              \
  Entry {                                                                            \
    [](PipelineConfig& c, const std::string& v) { c.path = parse_double(#path, v); }, \
        [](const PipelineConfig& c) { return fmt_double(c.path); }                   \
  }
#define DS_INT(path)                                                              \
  Entry {                                                                         \
    [](PipelineConfig& c, const std::string& v) { c.path = parse_int(#path, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.path); }            \
  }
#define DS_BOOL(path)                                                              \
  Entry {                                                                          \
    [](PipelineConfig& c, const std::string& v) { c.path = parse_bool(#path, v); }, \
        [](const PipelineConfig& c) { return std::string(c.path ? "true" : "false"); } \
  }
#define DS_PATH(path)                                                                 \
  Entry {                                                                             \
    [](PipelineConfig& c, const std::string& v) { c.path = unquote(v); },              \
        [](const PipelineConfig& c) { return "\"" + c.path.generic_string() + "\""; } \
  }

// Keys in serialization order.
const std::vector<std::pair<std::string, Entry>>& entries() {
  static const std::vector<std::pair<std::string, Entry>> table = {
      {"depth.baseline_m", DS_DOUBLE(baseline_m)},
      {"depth.max_depth_m", DS_DOUBLE(depth.max_depth_m)},
      {"depth.grad_threshold", DS_DOUBLE(depth.grad_threshold)},
      {"depth.max_vertical_flow_px", DS_DOUBLE(depth.checks.max_vertical_flow_px)},
      {"depth.max_cycle_error_px", DS_DOUBLE(depth.checks.max_cycle_error_px)},
      {"tracks.dedup_radius_px", DS_DOUBLE(dedup_radius_px)},
      {"trackopt.lr", DS_DOUBLE(optimizer.lr)},
      {"trackopt.steps", DS_INT(optimizer.steps)},
      {"trackopt.lambda_reg", DS_DOUBLE(optimizer.lambda_reg)},
      {"trackopt.m0", DS_DOUBLE(optimizer.m0)},
      {"trackopt.trail_window", DS_INT(optimizer.trail_window)},
      {"trackopt.windows",
       Entry{[](PipelineConfig& c, const std::string& v) {
               c.optimizer.windows.clear();
               for (const auto& s : parse_list(v)) {
                 c.optimizer.windows.push_back(parse_int("trackopt.windows", s));
               }
             },
             [](const PipelineConfig& c) {
               std::string s = "[";
               for (std::size_t i = 0; i < c.optimizer.windows.size(); ++i) {
                 if (i) s += ", ";
                 s += std::to_string(c.optimizer.windows[i]);
               }
               return s + "]";
             }}},
      {"trackopt.beta1", DS_DOUBLE(optimizer.beta1)},
      {"trackopt.beta2", DS_DOUBLE(optimizer.beta2)},
      {"trackopt.eps", DS_DOUBLE(optimizer.eps)},
      {"filters.semantic_m_threshold", DS_DOUBLE(filters.semantic_m_threshold)},
      {"filters.banned_classes",
       Entry{[](PipelineConfig& c, const std::string& v) {
               const auto items = parse_list(v);
               c.filters.banned_classes = std::set<std::string>(items.begin(), items.end());
             },
             [](const PipelineConfig& c) {
               std::string s = "[";
               bool first = true;
               for (const auto& name : c.filters.banned_classes) {
                 if (!first) s += ", ";
                 s += "\"" + name + "\"";
                 first = false;
               }
               return s + "]";
             }}},
      {"filters.min_matches", DS_INT(filters.min_matches)},
      {"filters.cross_fade_gap_s", DS_DOUBLE(filters.cross_fade_gap_s)},
      {"filters.trim_frac", DS_DOUBLE(filters.trim_frac)},
      {"filters.static_translation_m", DS_DOUBLE(filters.static_translation_m)},
      {"filters.static_rotation_deg", DS_DOUBLE(filters.static_rotation_deg)},
      {"filters.static_image_motion_px", DS_DOUBLE(filters.static_image_motion_px)},
      {"filters.moving_track_px", DS_DOUBLE(filters.moving_track_px)},
      {"filters.matcher_patch", DS_INT(filters.matcher.patch)},
      {"filters.matcher_stride", DS_INT(filters.matcher.stride)},
      {"filters.matcher_search_radius", DS_INT(filters.matcher.search_radius)},
      {"filters.matcher_min_ncc", DS_DOUBLE(filters.matcher.min_ncc)},
      {"pipeline.threads", DS_INT(threads)},
      {"pipeline.input_dir", DS_PATH(input_dir)},
      {"pipeline.output_dir", DS_PATH(output_dir)},
      {"export.lifted_tracks", DS_BOOL(export_lifted_tracks)},
      {"export.loss_traces", DS_BOOL(export_loss_traces)},
      {"export.ply_frame", DS_INT(export_ply_frame)},
      {"export.trajectories_ply", DS_BOOL(export_trajectories_ply)},
  };
  return table;
}

#undef DS_DOUBLE
#undef DS_INT
#undef DS_BOOL
#undef DS_PATH

const Entry& find_entry(const std::string& key) {
  const auto& table = entries();
  const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
  if (it == table.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(baseline_m > 0.0, "depth.baseline_m must be > 0");
  require(depth.max_depth_m > 0.0, "depth.max_depth_m must be > 0");
  require(depth.grad_threshold > 0.0, "depth.grad_threshold must be > 0");
  require(depth.checks.max_vertical_flow_px >= 0.0, "depth.max_vertical_flow_px must be >= 0");
  require(depth.checks.max_cycle_error_px >= 0.0, "depth.max_cycle_error_px must be >= 0");
  require(dedup_radius_px >= 0.0, "tracks.dedup_radius_px must be >= 0");
  require(threads >= 1, "pipeline.threads must be >= 1");
  require(filters.trim_frac >= 0.0 && filters.trim_frac < 0.5, "filters.trim_frac must be in [0, 0.5)");
  require(filters.cross_fade_gap_s > 0.0, "filters.cross_fade_gap_s must be > 0");
  require(filters.min_matches >= 0, "filters.min_matches must be >= 0");
  try {
    optimizer.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (!input_dir.empty() && !std::filesystem::exists(input_dir)) {
    throw ConfigError("invalid config: input_dir does not exist: " + input_dir.string());
  }
}

PipelineConfig default_config() {
  PipelineConfig cfg;
  cfg.threads = default_parallelism();
  return cfg;
}

void set_config_value(PipelineConfig& cfg, const std::string& dotted_key, const std::string& value) {
  find_entry(dotted_key).set(cfg, value);
}

void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream is(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[' && t.back() == ']' && t.find('=') == std::string::npos) {
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const std::string dotted = section.empty() ? key : section + "." + key;
    try {
      set_config_value(cfg, dotted, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

std::string config_to_text(const PipelineConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, entry] : entries()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << key.substr(dot + 1) << " = " << entry.get(cfg) << '\n';
  }
  return os.str();
}

}  // namespace dynstereo
