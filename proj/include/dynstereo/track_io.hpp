#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "dynstereo/grid_io.hpp"
#include "dynstereo/tracks.hpp"

namespace dynstereo {

/// Track table layout (little-endian):
///   char magic[4] ("TRK2" or "TRK3"); u32 version (=1); u32 num_frames N;
///   u32 track_count;
///   then per track: u32 track_id; u32 query_frame; N x (2 or 3) float32;
///   N x u8 visible.
/// Coordinates of invisible frames are written as NaN.
inline constexpr Magic kTrack2DMagic{'T', 'R', 'K', '2'};
inline constexpr Magic kTrack3DMagic{'T', 'R', 'K', '3'};
inline constexpr std::uint32_t kTrackTableVersion = 1;

void write_tracks2d(const std::filesystem::path& path, std::span<const Track2D> tracks,
                    int num_frames);
std::vector<Track2D> read_tracks2d(const std::filesystem::path& path);

void write_tracks3d(const std::filesystem::path& path, std::span<const Track3D> tracks,
                    int num_frames);
/// Rays and camera centers are not stored; use attach_cameras to restore them.
std::vector<Track3D> read_tracks3d(const std::filesystem::path& path);

/// Fills camera centers from `poses[i]` and recomputes rays.
void attach_cameras(Track3D& track, std::span<const CameraPose> poses);

}  // namespace dynstereo
