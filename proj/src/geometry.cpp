#include "dynstereo/geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

namespace dynstereo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kAngleTol = 1e-12;

bool finite(const Vec3& v) { return v.allFinite(); }

double snap_to_integer(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

// Bilinear sample in grid coordinates; NaN when outside the grid or when a
// neighbor with nonzero weight is NaN.
double sample_bilinear(const ImageGrid& img, double x, double y) {
  x = snap_to_integer(x);
  y = snap_to_integer(y);
  if (!(x >= 0.0 && y >= 0.0 && x <= img.width() - 1 && y <= img.height() - 1)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    const double wy = dy == 0 ? 1.0 - fy : fy;
    if (wy == 0.0) continue;
    for (int dx = 0; dx <= 1; ++dx) {
      const double wx = dx == 0 ? 1.0 - fx : fx;
      if (wx == 0.0) continue;
      acc += wx * wy * img(x0 + dx, y0 + dy);
    }
  }
  return acc;
}

}  // namespace

std::string_view to_string(CameraKind kind) {
  switch (kind) {
    case CameraKind::kPerspective:
      return "perspective";
    case CameraKind::kEquidistantFisheye:
      return "equidistant_fisheye";
    case CameraKind::kCroppedEquirectangular:
      return "cropped_equirectangular";
  }
  return "unknown";
}

CameraKind camera_kind_from_string(std::string_view name) {
  if (name == "perspective") return CameraKind::kPerspective;
  if (name == "equidistant_fisheye" || name == "fisheye") return CameraKind::kEquidistantFisheye;
  if (name == "cropped_equirectangular" || name == "equirectangular") {
    return CameraKind::kCroppedEquirectangular;
  }
  throw std::invalid_argument("unknown camera kind: " + std::string(name));
}

CameraModel CameraModel::perspective(int width, int height, double fov_h_deg) {
  CameraModel m;
  m.kind = CameraKind::kPerspective;
  m.width = width;
  m.height = height;
  m.fov_h_deg = fov_h_deg;
  m.focal = (width / 2.0) / std::tan(fov_h_deg * kDegToRad / 2.0);
  m.fov_v_deg = 2.0 * std::atan((height / 2.0) / m.focal) / kDegToRad;
  m.principal_point = Vec2(width / 2.0, height / 2.0);
  m.validate();
  return m;
}

CameraModel CameraModel::perspective_from_focal(int width, int height, double focal,
                                                std::optional<Vec2> principal_point) {
  CameraModel m;
  m.kind = CameraKind::kPerspective;
  m.width = width;
  m.height = height;
  m.focal = focal;
  m.fov_h_deg = 2.0 * std::atan((width / 2.0) / focal) / kDegToRad;
  m.fov_v_deg = 2.0 * std::atan((height / 2.0) / focal) / kDegToRad;
  m.principal_point = principal_point.value_or(Vec2(width / 2.0, height / 2.0));
  m.validate();
  return m;
}

CameraModel CameraModel::equidistant_fisheye(int width, int height, double fov_h_deg) {
  CameraModel m;
  m.kind = CameraKind::kEquidistantFisheye;
  m.width = width;
  m.height = height;
  m.fov_h_deg = fov_h_deg;
  m.focal = (width / 2.0) / (fov_h_deg * kDegToRad / 2.0);
  m.fov_v_deg = (height / m.focal) / kDegToRad;
  m.principal_point = Vec2(width / 2.0, height / 2.0);
  m.validate();
  return m;
}

CameraModel CameraModel::cropped_equirectangular(int width, int height, double yaw_start_deg,
                                                 double yaw_end_deg, double tilt_start_deg,
                                                 double tilt_end_deg) {
  CameraModel m;
  m.kind = CameraKind::kCroppedEquirectangular;
  m.width = width;
  m.height = height;
  m.yaw_start_deg = yaw_start_deg;
  m.yaw_end_deg = yaw_end_deg;
  m.tilt_start_deg = tilt_start_deg;
  m.tilt_end_deg = tilt_end_deg;
  m.fov_h_deg = yaw_end_deg - yaw_start_deg;
  m.fov_v_deg = tilt_end_deg - tilt_start_deg;
  m.principal_point = Vec2(width / 2.0, height / 2.0);
  m.validate();
  return m;
}

void CameraModel::validate() const {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("CameraModel: non-positive image size");
  }
  if (!(fov_h_deg > 0.0 && fov_h_deg <= 180.0)) {
    throw std::invalid_argument("CameraModel: fov_h must lie in (0, 180] degrees");
  }
  if (!principal_point.allFinite() || principal_point.x() < 0.0 || principal_point.y() < 0.0 ||
      principal_point.x() > width || principal_point.y() > height) {
    throw std::invalid_argument("CameraModel: principal point outside the image");
  }
  switch (kind) {
    case CameraKind::kPerspective: {
      if (!(fov_h_deg < 180.0) || !(focal > 0.0)) {
        throw std::invalid_argument("CameraModel: perspective needs fov_h < 180 and focal > 0");
      }
      const double expected = (width / 2.0) / std::tan(fov_h_deg * kDegToRad / 2.0);
      if (std::abs(expected - focal) > 1e-9 * focal) {
        throw std::invalid_argument("CameraModel: focal inconsistent with fov_h");
      }
      break;
    }
    case CameraKind::kEquidistantFisheye: {
      const double expected = (width / 2.0) / (fov_h_deg * kDegToRad / 2.0);
      if (!(focal > 0.0) || std::abs(expected - focal) > 1e-9 * focal) {
        throw std::invalid_argument("CameraModel: fisheye focal inconsistent with fov_h");
      }
      break;
    }
    case CameraKind::kCroppedEquirectangular:
      if (!(yaw_end_deg > yaw_start_deg) || !(tilt_end_deg > tilt_start_deg) ||
          tilt_start_deg < -90.0 || tilt_end_deg > 90.0) {
        throw std::invalid_argument("CameraModel: bad equirectangular angular extent");
      }
      if (std::abs((yaw_end_deg - yaw_start_deg) - fov_h_deg) > 1e-9) {
        throw std::invalid_argument("CameraModel: fov_h inconsistent with yaw extent");
      }
      break;
  }
}

Projection project_camera_ray(const Vec3& ray, const CameraModel& model) {
  if (!finite(ray)) throw std::invalid_argument("project: non-finite point");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  Projection out;
  const Vec2& pp = model.principal_point;
  switch (model.kind) {
    case CameraKind::kPerspective: {
      if (!(ray.z() > 0.0)) {
        out.pixel.u = nan;
        out.pixel.v = nan;
        return out;
      }
      out.pixel.u = model.focal * ray.x() / ray.z() + pp.x();
      out.pixel.v = model.focal * ray.y() / ray.z() + pp.y();
      out.in_front = true;
      break;
    }
    case CameraKind::kEquidistantFisheye: {
      const double rho = std::hypot(ray.x(), ray.y());
      if (rho == 0.0 && !(ray.z() > 0.0)) {
        out.pixel.u = nan;
        out.pixel.v = nan;
        return out;
      }
      const double theta = std::atan2(rho, ray.z());
      const double r = model.focal * theta;
      const double cx = rho > 0.0 ? ray.x() / rho : 0.0;
      const double cy = rho > 0.0 ? ray.y() / rho : 0.0;
      out.pixel.u = pp.x() + r * cx;
      out.pixel.v = pp.y() + r * cy;
      out.in_front = theta <= model.fov_h_deg * kDegToRad / 2.0 + kAngleTol;
      break;
    }
    case CameraKind::kCroppedEquirectangular: {
      if (ray.squaredNorm() == 0.0) {
        out.pixel.u = nan;
        out.pixel.v = nan;
        return out;
      }
      const double yaw = std::atan2(ray.x(), ray.z());
      const double tilt = std::atan2(ray.y(), std::hypot(ray.x(), ray.z()));
      const double yaw0 = model.yaw_start_deg * kDegToRad;
      const double yaw1 = model.yaw_end_deg * kDegToRad;
      const double tilt0 = model.tilt_start_deg * kDegToRad;
      const double tilt1 = model.tilt_end_deg * kDegToRad;
      out.pixel.u = (yaw - yaw0) / (yaw1 - yaw0) * model.width;
      out.pixel.v = (tilt - tilt0) / (tilt1 - tilt0) * model.height;
      out.in_front = yaw >= yaw0 - kAngleTol && yaw <= yaw1 + kAngleTol &&
                     tilt >= tilt0 - kAngleTol && tilt <= tilt1 + kAngleTol;
      break;
    }
  }
  out.in_bounds = out.in_front && model.in_bounds(out.pixel.uv());
  return out;
}

Vec3 pixel_ray(const Vec2& px, const CameraModel& model) {
  if (!px.allFinite()) throw std::invalid_argument("unproject: non-finite pixel");
  const Vec2& pp = model.principal_point;
  switch (model.kind) {
    case CameraKind::kPerspective:
      return {(px.x() - pp.x()) / model.focal, (px.y() - pp.y()) / model.focal, 1.0};
    case CameraKind::kEquidistantFisheye: {
      const double dx = px.x() - pp.x();
      const double dy = px.y() - pp.y();
      const double r = std::hypot(dx, dy);
      const double theta = r / model.focal;
      if (r == 0.0) return {0.0, 0.0, 1.0};
      const double s = std::sin(theta) / r;
      return {s * dx, s * dy, std::cos(theta)};
    }
    case CameraKind::kCroppedEquirectangular: {
      const double yaw0 = model.yaw_start_deg * kDegToRad;
      const double yaw1 = model.yaw_end_deg * kDegToRad;
      const double tilt0 = model.tilt_start_deg * kDegToRad;
      const double tilt1 = model.tilt_end_deg * kDegToRad;
      const double yaw = yaw0 + px.x() / model.width * (yaw1 - yaw0);
      const double tilt = tilt0 + px.y() / model.height * (tilt1 - tilt0);
      return {std::cos(tilt) * std::sin(yaw), std::sin(tilt), std::cos(tilt) * std::cos(yaw)};
    }
  }
  throw std::logic_error("pixel_ray: unknown camera kind");
}

Projection project(const Vec3& point_world, const CameraPose& pose, const CameraModel& model) {
  if (!finite(point_world)) throw std::invalid_argument("project: non-finite point");
  Projection out = project_camera_ray(pose.to_camera(point_world), model);
  out.pixel.frame_index = pose.frame_index;
  return out;
}

Vec3 unproject(const PixelPoint& pixel, double depth_m, const CameraPose& pose,
               const CameraModel& model) {
  if (!(depth_m > 0.0) || !std::isfinite(depth_m)) {
    throw std::invalid_argument("unproject: depth must be positive and finite");
  }
  // Perspective rays have z == 1, so scaling gives z-depth; other models
  // return unit rays, so scaling gives ray length.
  return pose.to_world(pixel_ray(pixel.uv(), model) * depth_m);
}

RectifiedRig rectify_rig(const CameraPose& left_pose, const RigCalibration& rig,
                         const CameraModel& model) {
  validate_rig(rig);
  const Vec3 baseline_world = left_pose.orientation * rig.relative_position;
  const double length = baseline_world.norm();
  const Vec3 x_axis = baseline_world / length;
  const Vec3 left_axis = left_pose.orientation.col(2);
  const Vec3 right_axis = left_pose.orientation * rig.relative_orientation.col(2);
  const Vec3 mean_axis = (left_axis + right_axis).normalized();
  const Vec3 y_raw = mean_axis.cross(x_axis);
  if (y_raw.norm() < 1e-9) {
    throw std::invalid_argument("rectify_rig: optical axis parallel to baseline");
  }
  const Vec3 y_axis = y_raw.normalized();
  const Vec3 z_axis = x_axis.cross(y_axis);

  Mat3 rectified;
  rectified.col(0) = x_axis;
  rectified.col(1) = y_axis;
  rectified.col(2) = z_axis;

  RectifiedRig out;
  out.left.frame_index = left_pose.frame_index;
  out.left.position = left_pose.position;
  out.left.orientation = rectified;
  out.right.frame_index = left_pose.frame_index;
  out.right.position = left_pose.position + x_axis * length;
  out.right.orientation = rectified;
  out.model = model;
  out.model.principal_point = Vec2(model.width / 2.0, model.height / 2.0);
  out.left_from_rectified = left_pose.orientation.transpose() * rectified;
  out.baseline_m = length;
  return out;
}

ImageGrid reproject_image(const ImageGrid& src, const CameraModel& src_model,
                          const CameraModel& dst_model, const Mat3& dst_to_src) {
  src_model.validate();
  dst_model.validate();
  if (src.width() != src_model.width || src.height() != src_model.height) {
    throw std::invalid_argument("reproject_image: source grid does not match its model");
  }
  ImageGrid dst(dst_model.width, dst_model.height, std::numeric_limits<double>::quiet_NaN());
  for (int y = 0; y < dst.height(); ++y) {
    for (int x = 0; x < dst.width(); ++x) {
      const Vec3 ray = dst_to_src * pixel_ray(Vec2(x, y), dst_model);
      const Projection p = project_camera_ray(ray, src_model);
      if (!p.in_front) continue;
      dst(x, y) = sample_bilinear(src, p.pixel.u, p.pixel.v);
    }
  }
  return dst;
}

double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

void validate_rotation(const Mat3& r, std::string_view what) {
  if (!r.allFinite() || orthonormality_error(r) >= 1e-9 || r.determinant() <= 0.0) {
    throw std::invalid_argument(std::string(what) + ": not a proper rotation matrix");
  }
}

void validate_pose(const CameraPose& pose) {
  if (!pose.position.allFinite()) {
    throw std::invalid_argument("pose " + std::to_string(pose.frame_index) +
                                ": non-finite position");
  }
  validate_rotation(pose.orientation, "pose " + std::to_string(pose.frame_index));
}

void validate_rig(const RigCalibration& rig) {
  if (!(rig.baseline_m > 0.0) || !rig.relative_position.allFinite() ||
      rig.relative_position.norm() < 1e-12) {
    throw std::invalid_argument("rig: degenerate baseline");
  }
  validate_rotation(rig.relative_orientation, "rig");
}

double rotation_angle(const Mat3& r) { return Eigen::AngleAxisd(r).angle(); }

}  // namespace dynstereo
