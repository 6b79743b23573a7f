#include "dynstereo/ply.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dynstereo/grid_io.hpp"
#include "dynstereo/rng.hpp"

namespace dynstereo {
namespace {

struct Vertex {
  Vec3 p;
  Rgb rgb;
  std::uint32_t id;
};

std::string header(std::size_t vertices, std::size_t edges, const PlyOptions& opts) {
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\n"
    << "element vertex " << vertices << '\n'
    << "property float x\nproperty float y\nproperty float z\n";
  if (opts.with_color) h << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (opts.with_track_id) h << "property uint track_id\n";
  if (edges > 0) {
    h << "element edge " << edges << "\nproperty int vertex1\nproperty int vertex2\n";
  }
  h << "end_header\n";
  return h.str();
}

Rgb color_of(const Track3D& t, const PlyOptions& opts) {
  return opts.color ? opts.color(t) : track_color(t.track_id);
}

void write_file(const std::filesystem::path& path, const std::vector<Vertex>& verts,
                const std::vector<std::pair<std::int32_t, std::int32_t>>& edges,
                const PlyOptions& opts) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << header(verts.size(), edges.size(), opts);
  for (const Vertex& v : verts) {
    le::write_f32(os, static_cast<float>(v.p.x()));
    le::write_f32(os, static_cast<float>(v.p.y()));
    le::write_f32(os, static_cast<float>(v.p.z()));
    if (opts.with_color) os.write(reinterpret_cast<const char*>(v.rgb.data()), 3);
    if (opts.with_track_id) le::write_u32(os, v.id);
  }
  for (const auto& [a, b] : edges) {
    le::write_i32(os, a);
    le::write_i32(os, b);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace

Rgb track_color(std::uint32_t track_id) {
  const std::uint64_t h = CounterRng::mix(track_id);
  return {static_cast<std::uint8_t>(64 + (h & 0xBF)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0xBF)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0xBF))};
}

std::size_t export_pointcloud(std::span<const Track3D> tracks, int frame,
                              const std::filesystem::path& path, const PlyOptions& opts) {
  int max_frames = 0;
  for (const Track3D& t : tracks) max_frames = std::max(max_frames, t.num_frames());
  if (frame < 0 || (frame >= max_frames && !tracks.empty())) {
    throw std::out_of_range("export_pointcloud: frame " + std::to_string(frame) +
                            " outside [0, " + std::to_string(max_frames) + ")");
  }
  const auto f = static_cast<std::size_t>(frame);
  std::vector<Vertex> verts;
  for (const Track3D& t : tracks) {
    if (f >= t.visible.size() || !t.visible[f]) continue;
    verts.push_back({t.points[f], opts.with_color ? color_of(t, opts) : Rgb{}, t.track_id});
  }
  write_file(path, verts, {}, opts);
  return verts.size();
}

std::size_t export_trajectories(std::span<const Track3D> tracks, const std::filesystem::path& path,
                                const PlyOptions& opts) {
  std::vector<Vertex> verts;
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  for (const Track3D& t : tracks) {
    const Rgb rgb = opts.with_color ? color_of(t, opts) : Rgb{};
    std::int32_t prev = -1;
    for (std::size_t i = 0; i < t.visible.size(); ++i) {
      if (!t.visible[i]) continue;
      const auto idx = static_cast<std::int32_t>(verts.size());
      verts.push_back({t.points[i], rgb, t.track_id});
      if (prev >= 0) edges.emplace_back(prev, idx);
      prev = idx;
    }
  }
  write_file(path, verts, edges, opts);
  return verts.size();
}

}  // namespace dynstereo
