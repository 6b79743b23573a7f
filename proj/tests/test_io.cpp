#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "dynstereo/grid_io.hpp"
#include "dynstereo/manifest.hpp"
#include "dynstereo/track_io.hpp"
#include "oracles.hpp"

using namespace dynstereo;
namespace fs = std::filesystem;

TEST(GridIo, FrameFileName) { EXPECT_EQ(frame_file_name(42), "frame_000042.grid"); }

TEST(GridIo, DisparityRoundTripKeepsMask) {
  const fs::path dir = oracle::fresh_dir("grid_disp");
  DisparityMap d{ImageGrid(5, 3, 2.5), Mask(5, 3, 1), 17};
  d.valid(1, 1) = 0;
  d.disparity(4, 2) = 0.125;
  write_disparity(dir / "d.grid", d);
  const DisparityMap r = read_disparity(dir / "d.grid");
  EXPECT_EQ(r.frame_index, 17);
  EXPECT_EQ(r.valid, d.valid);
  EXPECT_DOUBLE_EQ(r.disparity(4, 2), 0.125);
  EXPECT_DOUBLE_EQ(r.disparity(0, 0), 2.5);
}

TEST(GridIo, FlowAndLabelsRoundTrip) {
  const fs::path dir = oracle::fresh_dir("grid_flow");
  StereoFlowField f{ImageGrid(4, 2, 1.5), ImageGrid(4, 2, -0.25), ImageGrid(4, 2, 0.5), 3};
  f.flow_x(3, 1) = NAN;
  write_flow(dir / "f.grid", f);
  const StereoFlowField r = read_flow(dir / "f.grid");
  EXPECT_EQ(r.frame_index, 3);
  EXPECT_DOUBLE_EQ(r.flow_y(0, 0), -0.25);
  EXPECT_TRUE(std::isnan(r.flow_x(3, 1)));

  Grid<std::int32_t> ids(3, 3, 7);
  ids(2, 2) = -1;
  write_labels(dir / "l.grid", 9, ids);
  int frame = 0;
  EXPECT_EQ(read_labels(dir / "l.grid", &frame), ids);
  EXPECT_EQ(frame, 9);
}

TEST(GridIo, WrongMagicAndTruncationAreErrors) {
  const fs::path dir = oracle::fresh_dir("grid_bad");
  write_disparity(dir / "d.grid", DisparityMap{ImageGrid(4, 4, 1.0), Mask(4, 4, 1), 0});
  EXPECT_THROW(read_flow(dir / "d.grid"), IoError);
  const std::string bytes = oracle::read_file(dir / "d.grid");
  std::ofstream(dir / "short.grid", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_THROW(read_disparity(dir / "short.grid"), IoError);
  EXPECT_THROW(read_disparity(dir / "missing.grid"), IoError);
  try {
    read_disparity(dir / "missing.grid");
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.grid"), std::string::npos);
  }
}

TEST(TrackIo, Track2DRoundTrip) {
  const fs::path dir = oracle::fresh_dir("trk2");
  Track2D t;
  t.track_id = 77;
  t.query_frame = 1;
  t.positions = {Vec2(1, 2), Vec2(3.5, 4.25), Vec2(NAN, NAN)};
  t.visible = {1, 1, 0};
  write_tracks2d(dir / "t.trk", std::vector<Track2D>{t}, 3);
  const auto r = read_tracks2d(dir / "t.trk");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].track_id, 77u);
  EXPECT_EQ(r[0].query_frame, 1);
  EXPECT_EQ(r[0].visible, t.visible);
  EXPECT_EQ(r[0].positions[1], Vec2(3.5, 4.25));
}

TEST(TrackIo, Track3DRoundTripAndCameras) {
  const fs::path dir = oracle::fresh_dir("trk3");
  Track3D t;
  t.track_id = 5;
  t.points = {Vec3(0, 0, 2), Vec3(0.5, 0, 2)};
  t.visible = {1, 1};
  write_tracks3d(dir / "t.trk", std::vector<Track3D>{t}, 2);
  auto r = read_tracks3d(dir / "t.trk");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].points[1], Vec3(0.5, 0, 2));
  std::vector<CameraPose> poses(2);
  poses[1].position = Vec3(0.5, 0, 0);
  attach_cameras(r[0], poses);
  EXPECT_LT((r[0].rays[1] - Vec3(0, 0, 1)).norm(), 1e-12);
  EXPECT_THROW(read_tracks2d(dir / "t.trk"), IoError);
}

TEST(TrackIo, RejectsMismatchedFrameCount) {
  const fs::path dir = oracle::fresh_dir("trk_bad");
  Track2D t;
  t.positions = {Vec2(0, 0)};
  t.visible = {1};
  EXPECT_THROW(write_tracks2d(dir / "t.trk", std::vector<Track2D>{t}, 2), std::invalid_argument);
}

TEST(Manifest, RoundTripWithRelativePaths) {
  const fs::path dir = oracle::fresh_dir("manifest");
  ClipManifest m;
  m.clip_id = "c1";
  m.frame_count = 10;
  m.frame_start = 20;
  m.source_frame_count = 100;
  m.poses = dir / "poses.json";
  VariantManifest v;
  v.name = "fov60";
  v.camera = CameraModel::perspective(64, 64, 60.0);
  v.disparity_dir = dir / "disp";
  v.tracks = dir / "tracks.trk";
  m.variants.push_back(v);
  save_manifest(m, dir / "manifest.json");
  const std::string text = oracle::read_file(dir / "manifest.json");
  EXPECT_EQ(text.find(dir.string()), std::string::npos) << "paths should be relative";
  const ClipManifest r = load_manifest(dir / "manifest.json");
  EXPECT_EQ(r.clip_id, "c1");
  EXPECT_EQ(r.frame_start, 20);
  EXPECT_EQ(r.resolve(r.poses), dir / "poses.json");
  EXPECT_NEAR(r.variants[0].camera.focal, v.camera.focal, 1e-9);
  EXPECT_NO_THROW(r.validate());
}

TEST(Manifest, ValidationErrors) {
  ClipManifest m;
  m.clip_id = "x";
  m.frame_count = 1;
  EXPECT_THROW(m.validate(), ManifestError);
  m.frame_count = 5;
  m.poses = "p.json";
  EXPECT_THROW(m.validate(), ManifestError);  // no variants
  VariantManifest v;
  v.name = "a";
  v.camera = CameraModel::perspective(8, 8, 60.0);
  v.tracks = "t.trk";
  m.variants.push_back(v);
  EXPECT_THROW(m.validate(), ManifestError);  // neither disparity nor flow
  m.variants[0].disparity_dir = "d";
  EXPECT_NO_THROW(m.validate());
  m.source_frame_count = 3;
  EXPECT_THROW(m.validate(), ManifestError);
}

TEST(Manifest, PosesAndCameraJson) {
  const fs::path dir = oracle::fresh_dir("poses");
  std::vector<CameraPose> poses(2);
  poses[1].frame_index = 1;
  poses[1].position = Vec3(1, 2, 3);
  save_poses(dir / "p.json", poses);
  const auto r = load_poses(dir / "p.json");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].position, Vec3(1, 2, 3));
  for (const CameraModel& m : {CameraModel::perspective(64, 48, 75.0),
                               CameraModel::equidistant_fisheye(64, 64, 140.0),
                               CameraModel::cropped_equirectangular(128, 64, -60, 60, -30, 30)}) {
    const CameraModel back = camera_from_json(camera_to_json(m));
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_NEAR(back.focal, m.focal, 1e-9);
    EXPECT_NEAR(back.fov_h_deg, m.fov_h_deg, 1e-9);
  }
}
