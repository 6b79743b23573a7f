#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "dynstereo/depth.hpp"
#include "dynstereo/types.hpp"

namespace dynstereo {

/// Raised for malformed or unreadable files; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every grid file starts with a 16-byte little-endian header:
///   char magic[4]; u32 width; u32 height; i32 frame_index;
/// followed by width*height float32 samples per plane, row-major.
/// NaN encodes an invalid sample.
using Magic = std::array<char, 4>;
inline constexpr Magic kDisparityMagic{'D', 'S', 'P', 'G'};
inline constexpr Magic kDepthMagic{'D', 'P', 'T', 'G'};
inline constexpr Magic kFlowMagic{'F', 'L', 'W', 'G'};   // 3 planes: x, y, cycle
inline constexpr Magic kImageMagic{'I', 'M', 'G', 'G'};  // intensity frames
inline constexpr Magic kLabelMagic{'L', 'B', 'L', 'G'};  // int32 class ids

struct GridHeader {
  Magic magic{};
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::int32_t frame_index = 0;
};

namespace le {
void write_u32(std::ostream& os, std::uint32_t v);
void write_i32(std::ostream& os, std::int32_t v);
void write_f32(std::ostream& os, float v);
std::uint32_t read_u32(std::istream& is);
std::int32_t read_i32(std::istream& is);
float read_f32(std::istream& is);
}  // namespace le

void write_float_grid(const std::filesystem::path& path, const Magic& magic, int frame_index,
                      const ImageGrid& grid);
/// Reads one float plane; `expected` is checked against the file's magic.
ImageGrid read_float_grid(const std::filesystem::path& path, const Magic& expected,
                          int* frame_index = nullptr);

void write_disparity(const std::filesystem::path& path, const DisparityMap& disp);
DisparityMap read_disparity(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
/// Depth files do not carry baseline or focal; callers fill them in.
DepthMap read_depth(const std::filesystem::path& path);
void write_flow(const std::filesystem::path& path, const StereoFlowField& flow);
StereoFlowField read_flow(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, int frame_index, const Grid<std::int32_t>& ids);
Grid<std::int32_t> read_labels(const std::filesystem::path& path, int* frame_index = nullptr);

/// Conventional per-frame file name, e.g. frame_000042.grid.
std::string frame_file_name(int frame_index);

}  // namespace dynstereo
