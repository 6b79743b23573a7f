#include "dynstereo/grid_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace dynstereo {
namespace le {
namespace {

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(sizeof(T) == 4);
  auto bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {static_cast<char>(bits & 0xFFu), static_cast<char>((bits >> 8) & 0xFFu),
                         static_cast<char>((bits >> 16) & 0xFFu),
                         static_cast<char>((bits >> 24) & 0xFFu)};
  os.write(bytes, 4);
}

template <typename T>
T get(std::istream& is) {
  unsigned char bytes[4];
  if (!is.read(reinterpret_cast<char*>(bytes), 4)) throw IoError("unexpected end of file");
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put(os, v); }
void write_i32(std::ostream& os, std::int32_t v) { put(os, v); }
void write_f32(std::ostream& os, float v) { put(os, v); }
std::uint32_t read_u32(std::istream& is) { return get<std::uint32_t>(is); }
std::int32_t read_i32(std::istream& is) { return get<std::int32_t>(is); }
float read_f32(std::istream& is) { return get<float>(is); }

}  // namespace le

namespace {

std::string magic_string(const Magic& m) { return std::string(m.begin(), m.end()); }

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

void write_header(std::ostream& os, const Magic& magic, int w, int h, int frame_index) {
  os.write(magic.data(), 4);
  le::write_u32(os, static_cast<std::uint32_t>(w));
  le::write_u32(os, static_cast<std::uint32_t>(h));
  le::write_i32(os, frame_index);
}

GridHeader read_header(std::istream& is, const Magic& expected, const std::filesystem::path& path) {
  GridHeader hdr;
  if (!is.read(hdr.magic.data(), 4)) throw IoError("truncated header: " + path.string());
  if (hdr.magic != expected) {
    throw IoError("bad magic '" + magic_string(hdr.magic) + "' (expected '" +
                  magic_string(expected) + "'): " + path.string());
  }
  hdr.width = le::read_u32(is);
  hdr.height = le::read_u32(is);
  hdr.frame_index = le::read_i32(is);
  if (hdr.width > (1u << 16) || hdr.height > (1u << 16)) {
    throw IoError("implausible grid size: " + path.string());
  }
  return hdr;
}

void write_plane(std::ostream& os, const ImageGrid& g) {
  std::vector<char> buf(g.size() * 4);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(g.data()[i]));
    for (int b = 0; b < 4; ++b) buf[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

ImageGrid read_plane(std::istream& is, const GridHeader& hdr, const std::filesystem::path& path) {
  ImageGrid g(static_cast<int>(hdr.width), static_cast<int>(hdr.height));
  std::vector<unsigned char> buf(g.size() * 4);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw IoError("truncated grid data: " + path.string());
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const unsigned char* p = &buf[4 * i];
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    g.data()[i] = std::bit_cast<float>(bits);
  }
  return g;
}

ImageGrid masked_values(const ImageGrid& values, const Mask& valid) {
  ImageGrid out = values;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!valid.data()[i]) out.data()[i] = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void split_nan(const ImageGrid& in, ImageGrid& values, Mask& valid) {
  values = ImageGrid(in.width(), in.height(), 0.0);
  valid = Mask(in.width(), in.height(), 0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in.data()[i];
    if (std::isfinite(v)) {
      values.data()[i] = v;
      valid.data()[i] = 1;
    }
  }
}

}  // namespace

void write_float_grid(const std::filesystem::path& path, const Magic& magic, int frame_index,
                      const ImageGrid& grid) {
  auto os = open_out(path);
  write_header(os, magic, grid.width(), grid.height(), frame_index);
  write_plane(os, grid);
  if (!os) throw IoError("write failed: " + path.string());
}

ImageGrid read_float_grid(const std::filesystem::path& path, const Magic& expected,
                          int* frame_index) {
  auto is = open_in(path);
  const GridHeader hdr = read_header(is, expected, path);
  if (frame_index != nullptr) *frame_index = hdr.frame_index;
  return read_plane(is, hdr, path);
}

void write_disparity(const std::filesystem::path& path, const DisparityMap& disp) {
  write_float_grid(path, kDisparityMagic, disp.frame_index,
                   masked_values(disp.disparity, disp.valid));
}

DisparityMap read_disparity(const std::filesystem::path& path) {
  DisparityMap out;
  const ImageGrid raw = read_float_grid(path, kDisparityMagic, &out.frame_index);
  split_nan(raw, out.disparity, out.valid);
  return out;
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  write_float_grid(path, kDepthMagic, depth.frame_index,
                   masked_values(depth.depth, depth.valid));
}

DepthMap read_depth(const std::filesystem::path& path) {
  DepthMap out;
  const ImageGrid raw = read_float_grid(path, kDepthMagic, &out.frame_index);
  split_nan(raw, out.depth, out.valid);
  return out;
}

void write_flow(const std::filesystem::path& path, const StereoFlowField& flow) {
  if (!flow.flow_x.same_shape(flow.flow_y) || !flow.flow_x.same_shape(flow.cycle_error)) {
    throw std::invalid_argument("write_flow: flow grids differ in shape");
  }
  auto os = open_out(path);
  write_header(os, kFlowMagic, flow.flow_x.width(), flow.flow_x.height(), flow.frame_index);
  write_plane(os, flow.flow_x);
  write_plane(os, flow.flow_y);
  write_plane(os, flow.cycle_error);
  if (!os) throw IoError("write failed: " + path.string());
}

StereoFlowField read_flow(const std::filesystem::path& path) {
  auto is = open_in(path);
  const GridHeader hdr = read_header(is, kFlowMagic, path);
  StereoFlowField out;
  out.frame_index = hdr.frame_index;
  out.flow_x = read_plane(is, hdr, path);
  out.flow_y = read_plane(is, hdr, path);
  out.cycle_error = read_plane(is, hdr, path);
  return out;
}

void write_labels(const std::filesystem::path& path, int frame_index,
                  const Grid<std::int32_t>& ids) {
  auto os = open_out(path);
  write_header(os, kLabelMagic, ids.width(), ids.height(), frame_index);
  for (std::int32_t v : ids.data()) le::write_i32(os, v);
  if (!os) throw IoError("write failed: " + path.string());
}

Grid<std::int32_t> read_labels(const std::filesystem::path& path, int* frame_index) {
  auto is = open_in(path);
  const GridHeader hdr = read_header(is, kLabelMagic, path);
  if (frame_index != nullptr) *frame_index = hdr.frame_index;
  Grid<std::int32_t> ids(static_cast<int>(hdr.width), static_cast<int>(hdr.height));
  try {
    for (auto& v : ids.data()) v = le::read_i32(is);
  } catch (const IoError&) {
    throw IoError("truncated label data: " + path.string());
  }
  return ids;
}

std::string frame_file_name(int frame_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.grid", frame_index);
  return buf;
}

}  // namespace dynstereo
