#include "dynstereo/track_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace dynstereo {
namespace {

constexpr float kNanF = std::numeric_limits<float>::quiet_NaN();

void write_table_header(std::ostream& os, const Magic& magic, int num_frames, std::size_t count) {
  os.write(magic.data(), 4);
  le::write_u32(os, kTrackTableVersion);
  le::write_u32(os, static_cast<std::uint32_t>(num_frames));
  le::write_u32(os, static_cast<std::uint32_t>(count));
}

struct TableHeader {
  std::uint32_t num_frames = 0;
  std::uint32_t count = 0;
};

TableHeader read_table_header(std::istream& is, const Magic& expected,
                              const std::filesystem::path& path) {
  Magic m{};
  if (!is.read(m.data(), 4)) throw IoError("truncated track table: " + path.string());
  if (m != expected) throw IoError("not a track table of the expected kind: " + path.string());
  if (le::read_u32(is) != kTrackTableVersion) {
    throw IoError("unsupported track table version: " + path.string());
  }
  TableHeader h;
  h.num_frames = le::read_u32(is);
  h.count = le::read_u32(is);
  if (h.num_frames > (1u << 20)) throw IoError("implausible frame count: " + path.string());
  return h;
}

void check_frames(std::size_t have, int num_frames, std::uint32_t id) {
  if (have != static_cast<std::size_t>(num_frames)) {
    throw std::invalid_argument("track " + std::to_string(id) + " has " + std::to_string(have) +
                                " frames, table expects " + std::to_string(num_frames));
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  return is;
}

std::vector<std::uint8_t> read_bytes(std::istream& is, std::size_t n,
                                     const std::filesystem::path& path) {
  std::vector<std::uint8_t> v(n);
  if (n > 0 && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n))) {
    throw IoError("truncated track record: " + path.string());
  }
  return v;
}

}  // namespace

void write_tracks2d(const std::filesystem::path& path, std::span<const Track2D> tracks,
                    int num_frames) {
  auto os = open_out(path);
  write_table_header(os, kTrack2DMagic, num_frames, tracks.size());
  for (const Track2D& t : tracks) {
    check_frames(t.positions.size(), num_frames, t.track_id);
    le::write_u32(os, t.track_id);
    le::write_u32(os, static_cast<std::uint32_t>(t.query_frame));
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
      const bool vis = t.visible[i] != 0;
      le::write_f32(os, vis ? static_cast<float>(t.positions[i].x()) : kNanF);
      le::write_f32(os, vis ? static_cast<float>(t.positions[i].y()) : kNanF);
    }
    os.write(reinterpret_cast<const char*>(t.visible.data()),
             static_cast<std::streamsize>(t.visible.size()));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<Track2D> read_tracks2d(const std::filesystem::path& path) {
  auto is = open_in(path);
  const TableHeader h = read_table_header(is, kTrack2DMagic, path);
  std::vector<Track2D> out;
  out.reserve(h.count);
  try {
    for (std::uint32_t k = 0; k < h.count; ++k) {
      Track2D t;
      t.track_id = le::read_u32(is);
      t.query_frame = static_cast<int>(le::read_u32(is));
      t.positions.resize(h.num_frames);
      for (auto& p : t.positions) {
        const double u = le::read_f32(is);
        const double v = le::read_f32(is);
        p = Vec2(u, v);
      }
      t.visible = read_bytes(is, h.num_frames, path);
      out.push_back(std::move(t));
    }
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
  return out;
}

void write_tracks3d(const std::filesystem::path& path, std::span<const Track3D> tracks,
                    int num_frames) {
  auto os = open_out(path);
  write_table_header(os, kTrack3DMagic, num_frames, tracks.size());
  for (const Track3D& t : tracks) {
    check_frames(t.points.size(), num_frames, t.track_id);
    le::write_u32(os, t.track_id);
    le::write_u32(os, static_cast<std::uint32_t>(t.query_frame));
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      const bool vis = t.visible[i] != 0;
      for (int c = 0; c < 3; ++c) le::write_f32(os, vis ? static_cast<float>(t.points[i][c]) : kNanF);
    }
    os.write(reinterpret_cast<const char*>(t.visible.data()),
             static_cast<std::streamsize>(t.visible.size()));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<Track3D> read_tracks3d(const std::filesystem::path& path) {
  auto is = open_in(path);
  const TableHeader h = read_table_header(is, kTrack3DMagic, path);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Track3D> out;
  out.reserve(h.count);
  try {
    for (std::uint32_t k = 0; k < h.count; ++k) {
      Track3D t;
      t.track_id = le::read_u32(is);
      t.query_frame = static_cast<int>(le::read_u32(is));
      t.points.resize(h.num_frames);
      for (auto& p : t.points) {
        for (int c = 0; c < 3; ++c) p[c] = le::read_f32(is);
      }
      t.visible = read_bytes(is, h.num_frames, path);
      t.rays.assign(h.num_frames, Vec3::Constant(nan));
      t.camera_centers.assign(h.num_frames, Vec3::Constant(nan));
      t.pixels.assign(h.num_frames, Vec2::Constant(nan));
      out.push_back(std::move(t));
    }
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
  return out;
}

void attach_cameras(Track3D& track, std::span<const CameraPose> poses) {
  track.camera_centers.resize(track.points.size());
  for (std::size_t i = 0; i < track.points.size(); ++i) {
    if (!track.visible[i]) continue;
    if (i >= poses.size()) throw std::out_of_range("attach_cameras: missing pose");
    track.camera_centers[i] = poses[i].position;
  }
  track.refresh_rays();
}

}  // namespace dynstereo
