#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "dynstereo/types.hpp"

namespace dynstereo {

inline constexpr double kNominalBaselineM = 0.063;

/// Pose of the (left) camera at one frame. `orientation` maps camera-frame
/// vectors to world-frame vectors; a camera-frame point x lives at
/// position + orientation * x in the world.
struct CameraPose {
  int frame_index = 0;
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();

  [[nodiscard]] Vec3 to_camera(const Vec3& world) const {
    return orientation.transpose() * (world - position);
  }
  [[nodiscard]] Vec3 to_world(const Vec3& camera) const {
    return position + orientation * camera;
  }
};

/// Right camera relative to the left, expressed in the left camera frame.
struct RigCalibration {
  Vec3 relative_position{kNominalBaselineM, 0.0, 0.0};
  Mat3 relative_orientation = Mat3::Identity();
  double baseline_m = kNominalBaselineM;
};

enum class CameraKind { kPerspective, kEquidistantFisheye, kCroppedEquirectangular };

std::string_view to_string(CameraKind kind);
CameraKind camera_kind_from_string(std::string_view name);

/// Ideal camera model. Pixel coordinates are continuous with the image
/// covering [0, width] x [0, height]; camera frame is x right, y down,
/// z forward.
struct CameraModel {
  CameraKind kind = CameraKind::kPerspective;
  int width = 0;
  int height = 0;
  double fov_h_deg = 0.0;
  double fov_v_deg = 0.0;
  /// Pixels per tangent unit (perspective) or per radian (fisheye).
  double focal = 0.0;
  Vec2 principal_point = Vec2::Zero();
  /// Angular extent of a cropped equirectangular image, degrees.
  double yaw_start_deg = -90.0;
  double yaw_end_deg = 90.0;
  double tilt_start_deg = -90.0;
  double tilt_end_deg = 90.0;

  static CameraModel perspective(int width, int height, double fov_h_deg);
  static CameraModel perspective_from_focal(int width, int height, double focal,
                                            std::optional<Vec2> principal_point = std::nullopt);
  static CameraModel equidistant_fisheye(int width, int height, double fov_h_deg);
  static CameraModel cropped_equirectangular(int width, int height, double yaw_start_deg = -90.0,
                                             double yaw_end_deg = 90.0,
                                             double tilt_start_deg = -90.0,
                                             double tilt_end_deg = 90.0);

  /// Throws std::invalid_argument when the parameters are inconsistent.
  void validate() const;

  [[nodiscard]] bool in_bounds(const Vec2& px) const noexcept {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
  }
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  int frame_index = 0;

  [[nodiscard]] Vec2 uv() const { return {u, v}; }
};

struct Projection {
  PixelPoint pixel;
  /// False behind a perspective camera or outside a wide-angle model's FoV.
  bool in_front = false;
  bool in_bounds = false;
};

/// Pixel of a camera-frame direction (need not be unit length).
Projection project_camera_ray(const Vec3& ray, const CameraModel& model);
/// Camera-frame direction of a pixel. Unit length for fisheye and
/// equirectangular models; z == 1 for perspective.
Vec3 pixel_ray(const Vec2& px, const CameraModel& model);

Projection project(const Vec3& point_world, const CameraPose& pose, const CameraModel& model);

/// Depth is z-depth for perspective models and ray length otherwise.
Vec3 unproject(const PixelPoint& pixel, double depth_m, const CameraPose& pose,
               const CameraModel& model);

struct RectifiedRig {
  CameraPose left;
  CameraPose right;
  CameraModel model;
  /// Rotation taking rectified camera-frame vectors into the original left
  /// camera frame.
  Mat3 left_from_rectified = Mat3::Identity();
  double baseline_m = 0.0;
};

/// Rotates both cameras of a rig onto a common orientation whose x-axis is
/// the baseline. The output model keeps the input's focal and FoV with a
/// centered principal point.
RectifiedRig rectify_rig(const CameraPose& left_pose, const RigCalibration& rig,
                         const CameraModel& model);

/// Resamples `src` into `dst_model`. `dst_to_src` rotates destination
/// camera-frame rays into the source camera frame. Pixels outside the source
/// FoV, or touching NaN source samples, come out as NaN.
ImageGrid reproject_image(const ImageGrid& src, const CameraModel& src_model,
                          const CameraModel& dst_model, const Mat3& dst_to_src);

/// Max-norm of R^T R - I.
double orthonormality_error(const Mat3& r);
/// Throws std::invalid_argument unless `r` is a proper rotation (tol 1e-9).
void validate_rotation(const Mat3& r, std::string_view what);
void validate_pose(const CameraPose& pose);
void validate_rig(const RigCalibration& rig);

/// Rotation angle of `r` in radians.
double rotation_angle(const Mat3& r);

}  // namespace dynstereo
