#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>

#include "dynstereo/tracks.hpp"

namespace dynstereo {

using Rgb = std::array<std::uint8_t, 3>;

struct PlyOptions {
  bool with_color = false;
  bool with_track_id = true;
  /// Color per track; defaults to a hash of the track id.
  std::function<Rgb(const Track3D&)> color;
};

/// Stable pseudo-random color for a track id.
Rgb track_color(std::uint32_t track_id);

/// Binary little-endian PLY of the points visible at `frame`: float x, y, z,
/// optional uchar red, green, blue and uint track_id. Returns the vertex count.
/// Throws std::out_of_range for a frame outside every track, and IoError on
/// write failures.
std::size_t export_pointcloud(std::span<const Track3D> tracks, int frame,
                              const std::filesystem::path& path, const PlyOptions& opts = {});

/// All visible points of every track as vertices, with an edge element
/// joining consecutive visible points of the same track.
std::size_t export_trajectories(std::span<const Track3D> tracks, const std::filesystem::path& path,
                                const PlyOptions& opts = {});

}  // namespace dynstereo
