#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Minimal reader for the binary little-endian PLY files the library writes.
struct PlyData {
  std::vector<std::array<float, 3>> xyz;
  std::vector<std::array<std::uint8_t, 3>> rgb;
  std::vector<std::uint32_t> track_id;
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  bool has_color = false;
  bool has_track_id = false;
};

PlyData read_ply(const std::filesystem::path& path);

}  // namespace oracle
