#include "dynstereo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "dynstereo/grid_io.hpp"
#include "dynstereo/parallel.hpp"
#include "dynstereo/ply.hpp"
#include "dynstereo/track_io.hpp"

namespace dynstereo {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Runs fn, converting any non-stage exception into a StageError tagged `stage`.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

struct RectifiedVariant {
  CameraModel model;
  std::vector<CameraPose> poses;
};

RectifiedVariant rectify_variant(const ClipInput& in, const CameraModel& model) {
  RectifiedVariant rv;
  rv.poses.reserve(in.poses.size());
  for (const CameraPose& p : in.poses) {
    RectifiedRig rr = rectify_rig(p, in.rig, model);
    rv.model = rr.model;
    rv.poses.push_back(rr.left);
  }
  if (in.poses.empty()) rv.model = model;
  return rv;
}

MatchCountSeries builtin_series(const ClipInput& in, const FilterConfig& f) {
  MatchCountSeries s;
  s.gap = std::max(1, static_cast<int>(std::lround(f.cross_fade_gap_s * in.frame_rate)));
  for (int a = 0; a + s.gap < in.frame_count; a += s.gap) {
    const int b = a + s.gap;
    s.pairs.push_back({a, b, builtin_match_count(in.frame_image(a), in.frame_image(b), f.matcher)});
  }
  return s;
}

}  // namespace

ClipInput load_clip(const ClipManifest& m, const PipelineConfig& cfg) {
  return in_stage("load", [&] {
    m.validate();
    ClipInput in;
    in.clip_id = m.clip_id;
    in.frame_start = m.frame_start;
    in.frame_count = m.frame_count;
    in.frame_rate = m.frame_rate;
    in.source_frame_count = m.source_frame_count;
    in.rig = m.rig;
    in.poses = load_poses(m.resolve(m.poses));
    std::sort(in.poses.begin(), in.poses.end(),
              [](const CameraPose& a, const CameraPose& b) { return a.frame_index < b.frame_index; });
    if (static_cast<int>(in.poses.size()) != m.frame_count) {
      throw StageError("load", "poses cover " + std::to_string(in.poses.size()) + " of " +
                                   std::to_string(m.frame_count) + " frames");
    }
    for (int i = 0; i < m.frame_count; ++i) {
      if (in.poses[static_cast<std::size_t>(i)].frame_index != i) {
        throw StageError("load", "missing pose for frame " + std::to_string(i));
      }
      validate_pose(in.poses[static_cast<std::size_t>(i)]);
    }

    std::shared_ptr<const std::vector<std::string>> class_names;
    if (!m.class_names.empty()) {
      class_names = std::make_shared<const std::vector<std::string>>(load_class_names(m.resolve(m.class_names)));
    }
    const StereoChecks checks = cfg.depth.checks;
    for (const VariantManifest& vm : m.variants) {
      VariantInput v;
      v.name = vm.name;
      v.model = vm.camera;
      v.tracks = read_tracks2d(m.resolve(vm.tracks));
      for (const Track2D& t : v.tracks) {
        if (t.num_frames() != m.frame_count) {
          throw StageError("load", "track table " + vm.tracks.string() + " has " +
                                       std::to_string(t.num_frames()) + " frames, expected " +
                                       std::to_string(m.frame_count));
        }
      }
      if (!vm.disparity_dir.empty()) {
        const fs::path dir = m.resolve(vm.disparity_dir);
        v.disparity_at = [dir](int i) { return read_disparity(dir / frame_file_name(i)); };
      } else {
        const fs::path dir = m.resolve(vm.flow_dir);
        v.disparity_at = [dir, checks](int i) {
          return flow_to_disparity(read_flow(dir / frame_file_name(i)), checks);
        };
      }
      if (!vm.labels_dir.empty()) {
        if (!class_names) throw StageError("load", "labels given without class_names");
        const fs::path dir = m.resolve(vm.labels_dir);
        for (int i = 0; i < m.frame_count; ++i) {
          const fs::path f = dir / frame_file_name(i);
          if (!fs::exists(f)) continue;
          LabelMap lm;
          lm.ids = read_labels(f);
          lm.class_names = class_names;
          lm.frame_index = i;
          v.labels.emplace(i, std::move(lm));
        }
      }
      in.variants.push_back(std::move(v));
    }
    if (!m.match_counts.empty()) in.match_counts = load_match_counts(m.resolve(m.match_counts));
    if (!m.frames_dir.empty()) {
      const fs::path dir = m.resolve(m.frames_dir);
      in.frame_image = [dir](int i) { return read_float_grid(dir / frame_file_name(i), kImageMagic); };
    }
    return in;
  });
}

ClipInput clip_input_from_bundle(const GroundTruthBundle& b, const std::string& clip_id) {
  ClipInput in;
  in.clip_id = clip_id;
  in.frame_count = b.frame_count();
  in.frame_rate = b.fps;
  in.poses = b.poses;
  in.rig = b.rig;
  for (std::size_t v = 0; v < b.variants.size(); ++v) {
    VariantInput vi;
    vi.name = b.variants[v].name;
    vi.model = b.variants[v].model;
    vi.tracks = b.variants[v].tracks;
    const RenderedVariant* rv = &b.variants[v];
    vi.disparity_at = [rv](int i) { return rv->disparity.at(static_cast<std::size_t>(i)); };
    in.variants.push_back(std::move(vi));
  }
  return in;
}

ClipResult process_clip(const ClipInput& in, const PipelineConfig& cfg) {
  ClipResult r;
  r.clip_id = in.clip_id;
  const int n = in.frame_count;
  const int threads = cfg.threads;
  auto enter = [&r](std::string_view stage) { r.stage_log.emplace_back(stage); };

  enter("load");

  if (static_cast<int>(in.poses.size()) != n) {
    throw StageError("load", "pose count does not match frame count");
  }
  const std::size_t nv = in.variants.size();
  std::vector<RectifiedVariant> rect(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    rect[v] = in_stage("load", [&] { return rectify_variant(in, in.variants[v].model); });
    r.input_tracks += in.variants[v].tracks.size();
  }

  // Depth per frame, sampled at every track position visible there. Maps are
  // dropped as soon as they are sampled.
  enter("depth");
  std::vector<std::vector<std::vector<double>>> samples(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    const VariantInput& vi = in.variants[v];
    const CameraModel& model = rect[v].model;
    samples[v].assign(vi.tracks.size(), std::vector<double>(static_cast<std::size_t>(n), kNan));
    std::vector<std::vector<std::size_t>> at_frame(static_cast<std::size_t>(n));
    for (std::size_t t = 0; t < vi.tracks.size(); ++t) {
      for (int i = 0; i < n; ++i) {
        if (vi.tracks[t].visible[static_cast<std::size_t>(i)]) at_frame[static_cast<std::size_t>(i)].push_back(t);
      }
    }
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
      in_stage("depth", [&] {
        const DisparityMap disp = vi.disparity_at(static_cast<int>(i));
        if (disp.width() != model.width || disp.height() != model.height) {
          throw StageError("depth", "variant " + vi.name + " frame " + std::to_string(i) +
                                        ": disparity size does not match the camera");
        }
        const DepthMap depth = depth_from_disparity(disp, cfg.baseline_m, model.focal, cfg.depth);
        for (std::size_t t : at_frame[i]) {
          samples[v][t][i] = sample_depth(depth, vi.tracks[t].positions[i]).value_or(kNan);
        }
      });
    });
  }

  // Union of variants, deduplicated in the widest variant's pixel frame.
  enter("dedup");
  struct Ref {
    std::size_t variant;
    std::size_t index;
  };
  std::vector<Ref> kept_refs;
  in_stage("dedup", [&] {
    std::size_t ref = 0;
    for (std::size_t v = 1; v < nv; ++v) {
      if (rect[v].model.fov_h_deg > rect[ref].model.fov_h_deg) ref = v;
    }
    std::unordered_map<std::uint32_t, Ref> by_id;
    std::vector<Track2D> common;
    common.reserve(r.input_tracks);
    for (std::size_t v = 0; v < nv; ++v) {
      const auto& tracks = in.variants[v].tracks;
      for (std::size_t t = 0; t < tracks.size(); ++t) {
        if (!by_id.emplace(tracks[t].track_id, Ref{v, t}).second) {
          throw StageError("dedup", "duplicate track id " + std::to_string(tracks[t].track_id));
        }
        common.push_back(v == ref ? tracks[t]
                                  : remap_track(tracks[t], rect[v].model, rect[ref].model));
      }
    }
    for (const Track2D& t : dedup_queries(std::move(common), cfg.dedup_radius_px)) {
      kept_refs.push_back(by_id.at(t.track_id));
    }
  });
  r.after_dedup = kept_refs.size();

  enter("lift");
  std::vector<Track3D> lifted(kept_refs.size());
  parallel_for(kept_refs.size(), threads, [&](std::size_t k) {
    in_stage("lift", [&] {
      const Ref ref = kept_refs[k];
      lifted[k] = lift_track_with_depths(in.variants[ref.variant].tracks[ref.index], rect[ref.variant].poses,
                                         samples[ref.variant][ref.index], rect[ref.variant].model);
      lifted[k].source_variant = static_cast<int>(ref.variant);
    });
  });
  samples.clear();
  std::erase_if(lifted, [](const Track3D& t) { return t.visible_count() < 2; });
  r.after_lift = lifted.size();

  enter("trail");
  std::vector<MotionMagnitude> motions(lifted.size());
  parallel_for(lifted.size(), threads, [&](std::size_t k) {
    in_stage("trail", [&] {
      const auto v = static_cast<std::size_t>(lifted[k].source_variant);
      motions[k] = trail_motion_magnitude(lifted[k], rect[v].poses, rect[v].model,
                                          cfg.optimizer.trail_window);
    });
  });

  enter("optimize");
  std::vector<OptimizeResult> solved =
      in_stage("optimize", [&] { return optimize_tracks(lifted, motions, cfg.optimizer, threads); });

  enter("filter");
  in_stage("filter", [&] {
    std::vector<std::uint8_t> keep(lifted.size(), 1);
    for (std::size_t k = 0; k < lifted.size(); ++k) {
      const auto& labels = in.variants[static_cast<std::size_t>(lifted[k].source_variant)].labels;
      if (labels.empty() || motions[k].m <= cfg.filters.semantic_m_threshold) continue;
      std::vector<TrackWithMotion> one{{lifted[k], motions[k]}};
      if (prune_semantic_drift(std::move(one), labels, cfg.filters.banned_classes,
                               cfg.filters.semantic_m_threshold)
              .empty()) {
        keep[k] = 0;
      }
    }
    for (std::size_t k = 0; k < lifted.size(); ++k) {
      if (!keep[k]) continue;
      r.lifted.push_back(std::move(lifted[k]));
      r.tracks.push_back(std::move(solved[k].adjusted));
      r.motions.push_back(motions[k]);
      r.solve.push_back({solved[k].sigma, solved[k].warning, solved[k].returned_step,
                         std::move(solved[k].loss_trace)});
      if (solved[k].warning) ++r.optimizer_warnings;
    }
    r.after_filter = r.tracks.size();

    r.camera_static = camera_static_test(in.poses, cfg.filters.static_translation_m,
                                         cfg.filters.static_rotation_deg);
    if (r.camera_static) {
      std::optional<MatchCountSeries> series = in.match_counts;
      if (!series && in.frame_image) series = builtin_series(in, cfg.filters);
      if (series && detect_cross_fade(*series, true, cfg.filters.min_matches)) {
        r.verdict.reject(RejectReason::kCrossFade);
      }
    }
    if (is_static_image(r.camera_static, r.motions, cfg.filters.static_image_motion_px)) {
      r.verdict.reject(RejectReason::kStaticImage);
    }
    if (in.source_frame_count >= 0 &&
        touches_trimmed_boundary(in.frame_start, in.frame_count, in.source_frame_count,
                                 cfg.filters.trim_frac)) {
      r.verdict.reject(RejectReason::kBoundaryTrim);
    }
  });

  enter("stats");
  r.stats = clip_stats(r.motions, in.poses, cfg.filters.moving_track_px);
  r.visibility = track_visibility_stats(r.tracks);
  return r;
}

json ClipResult::verdict_json() const {
  json reasons = json::array();
  for (RejectReason reason : verdict.reasons) reasons.push_back(std::string(to_string(reason)));
  return {{"clip_id", clip_id}, {"accepted", verdict.accepted}, {"reasons", std::move(reasons)},
          {"camera_static", camera_static}};
}

json ClipResult::stats_json() const {
  return {{"clip_id", clip_id},
          {"frame_count", stats.frame_count},
          {"camera_displacement_m", stats.camera_displacement_m},
          {"percent_tracks_above_50px", stats.percent_tracks_above_50px},
          {"moving_track_count", stats.moving_track_count},
          {"track_count", stats.track_count},
          {"input_tracks", input_tracks},
          {"after_dedup", after_dedup},
          {"after_lift", after_lift},
          {"after_filter", after_filter},
          {"optimizer_warnings", optimizer_warnings},
          {"visible_points", visibility.visible_points},
          {"mean_visible_length", visibility.mean_visible_length},
          {"per_frame_density", visibility.per_frame_density},
          {"stage_order", stage_log}};
}

void export_clip(const ClipResult& r, const fs::path& dir, const PipelineConfig& cfg) {
  in_stage("export", [&] {
    fs::create_directories(dir);
    std::string log;
    for (const auto& s : r.stage_log) log += s + '\n';
    write_text(dir / "stage_log.txt", log + "export\n");
    write_text(dir / "verdict.json", r.verdict_json().dump(2) + '\n');
    write_text(dir / "stats.json", r.stats_json().dump(2) + '\n');

    std::ostringstream motion;
    motion << "track_id,source_variant,m,sigma,warning,returned_step,visible_frames\n";
    for (std::size_t k = 0; k < r.tracks.size(); ++k) {
      motion << r.tracks[k].track_id << ',' << r.tracks[k].source_variant << ','
             << num(r.motions[k].m) << ',' << num(r.solve[k].sigma) << ',' << int(r.solve[k].warning)
             << ',' << r.solve[k].returned_step << ',' << r.tracks[k].visible_count() << '\n';
    }
    write_text(dir / "motion.csv", motion.str());

    const int n = r.stats.frame_count > 0 ? static_cast<int>(r.stats.frame_count) : 0;
    for (const char* stale : {"tracks3d.trk", "tracks3d_lifted.trk", "loss_traces.csv",
                              "pointcloud.ply", "trajectories.ply"}) {
      fs::remove(dir / stale);
    }
    if (!r.verdict.accepted) return;
    write_tracks3d(dir / "tracks3d.trk", r.tracks, n);
    if (cfg.export_lifted_tracks) write_tracks3d(dir / "tracks3d_lifted.trk", r.lifted, n);
    if (cfg.export_loss_traces) {
      std::ostringstream os;
      os << "track_id,step,objective\n";
      for (std::size_t k = 0; k < r.tracks.size(); ++k) {
        for (std::size_t s = 0; s < r.solve[k].loss_trace.size(); ++s) {
          os << r.tracks[k].track_id << ',' << s << ',' << num(r.solve[k].loss_trace[s]) << '\n';
        }
      }
      write_text(dir / "loss_traces.csv", os.str());
    }
    if (cfg.export_ply_frame >= 0) {
      if (cfg.export_ply_frame >= n) {
        throw StageError("export", "ply frame " + std::to_string(cfg.export_ply_frame) +
                                       " outside the clip");
      }
      export_pointcloud(r.tracks, cfg.export_ply_frame, dir / "pointcloud.ply", {true, true, {}});
    }
    if (cfg.export_trajectories_ply) {
      export_trajectories(r.tracks, dir / "trajectories.ply", {true, true, {}});
    }
  });
}

ClipRunStatus run_clip(const fs::path& manifest_path, const PipelineConfig& cfg,
                       const fs::path& out_root) {
  ClipRunStatus st;
  st.manifest = manifest_path;
  st.clip_id = manifest_path.parent_path().filename().string();
  try {
    const ClipManifest m = in_stage("load", [&] { return load_manifest(manifest_path); });
    st.clip_id = m.clip_id;
    const ClipInput in = load_clip(m, cfg);
    const ClipResult r = process_clip(in, cfg);
    export_clip(r, out_root / m.clip_id, cfg);
    st.ok = true;
    st.accepted = r.verdict.accepted;
    for (RejectReason reason : r.verdict.reasons) st.reasons.emplace_back(to_string(reason));
  } catch (const StageError& e) {
    st.failed_stage = e.stage();
    st.message = e.what();
  } catch (const std::exception& e) {
    st.failed_stage = "unknown";
    st.message = e.what();
  }
  return st;
}

json CorpusReport::failures_json() const {
  json out = json::array();
  for (const ClipRunStatus& c : clips) {
    if (c.ok) continue;
    out.push_back({{"clip_id", c.clip_id},
                   {"manifest", c.manifest.generic_string()},
                   {"stage", c.failed_stage},
                   {"message", c.message}});
  }
  return out;
}

std::vector<fs::path> discover_manifests(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(root)) return {root};
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "manifest.json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

CorpusReport run_corpus(const std::vector<fs::path>& manifests, const PipelineConfig& cfg,
                        const fs::path& out_root) {
  CorpusReport rep;
  rep.clips.resize(manifests.size());
  // Clip-level queue; a lone clip gets the track-level workers instead.
  PipelineConfig clip_cfg = cfg;
  if (manifests.size() > 1) clip_cfg.threads = 1;
  const int clip_workers = manifests.size() > 1 ? cfg.threads : 1;
  parallel_for(manifests.size(), clip_workers, [&](std::size_t i) {
    rep.clips[i] = run_clip(manifests[i], clip_cfg, out_root);
  });
  json summary = json::array();
  for (const ClipRunStatus& c : rep.clips) {
    if (!c.ok) {
      ++rep.failed;
    } else {
      ++rep.ok;
      if (!c.accepted) ++rep.rejected;
    }
    summary.push_back({{"clip_id", c.clip_id},
                       {"ok", c.ok},
                       {"accepted", c.accepted},
                       {"reasons", c.reasons},
                       {"failed_stage", c.failed_stage}});
  }
  fs::create_directories(out_root);
  write_text(out_root / "failures.json", rep.failures_json().dump(2) + '\n');
  write_text(out_root / "corpus_summary.json",
             json{{"ok", rep.ok}, {"failed", rep.failed}, {"rejected", rep.rejected}, {"clips", summary}}
                     .dump(2) +
                 '\n');
  return rep;
}

}  // namespace dynstereo
