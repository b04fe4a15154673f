#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <vector>

namespace heightlab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Frame conventions used throughout:
//   road / ego : x right, y forward, z up
//   camera     : x right, y down,    z forward (optical axis)

/// Rigid SE(3) transform p' = R p + t. Names follow the "target_from_source"
/// pattern, e.g. road_from_ego maps ego coordinates into road coordinates.
class RigidTransform {
 public:
  RigidTransform();  // identity

  /// Throws InvalidArgument unless R is a proper rotation (within 1e-6).
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform translation(double x, double y, double z);
  static RigidTransform rot_x(double radians);
  static RigidTransform rot_y(double radians);
  static RigidTransform rot_z(double radians);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 operator*(const Vec3& p) const { return apply(p); }

  /// 4x4 homogeneous matrix.
  Eigen::Matrix4d matrix() const;

  /// Row-major 3x4 [R|t].
  std::array<double, 12> to_row_major() const;

  /// Builds from row-major 3x4 [R|t]. The rotation is projected back onto
  /// SO(3) when it deviates from orthonormality by more than 1e-7.
  static RigidTransform from_row_major(std::span<const double, 12> m);

  /// Largest absolute entry of R^T R - I.
  double orthonormality_error() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Apply b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);
std::vector<Vec3> transform_points(const RigidTransform& t, std::span<const Vec3> pts);

/// Max elementwise difference of the 4x4 homogeneous matrices.
double max_abs_difference(const RigidTransform& a, const RigidTransform& b);

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool operator==(const Intrinsics&) const = default;
};

/// Pinhole camera with an extrinsic mapping ego coordinates into the camera.
class CameraModel {
 public:
  /// Throws InvalidArgument if fx, fy are not positive or the principal
  /// point lies outside the image.
  CameraModel(const Intrinsics& intrinsics, const RigidTransform& camera_from_ego);

  const Intrinsics& intrinsics() const { return intrinsics_; }
  const RigidTransform& camera_from_ego() const { return camera_from_ego_; }
  int width() const { return intrinsics_.width; }
  int height() const { return intrinsics_.height; }

  /// Unit-depth ray direction (camera frame, z = 1) through pixel (u, v).
  Vec3 pixel_ray(double u, double v) const;

 private:
  Intrinsics intrinsics_;
  RigidTransform camera_from_ego_;
};

/// Camera mounted on a level ego frame: center at (0, forward_offset, height)
/// in ego coordinates, optical axis pitched down by pitch radians.
RigidTransform camera_mount(double height, double forward_offset, double pitch);

inline constexpr double kDepthEpsilon = 1e-6;

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // camera-frame z
  bool valid = false;
};

/// Pinhole projection of a camera-frame point. Invalid when depth <= 1e-6 m
/// or (u, v) falls outside [0, width-1] x [0, height-1].
Projection project_camera_point(const Intrinsics& k, const Vec3& p_cam);

Projection project_point(const CameraModel& cam, const Vec3& p_ego);
std::vector<Projection> project(const CameraModel& cam, std::span<const Vec3> pts_ego);

/// Road coordinate frame for one timestamp.
class RoadFrame {
 public:
  RoadFrame() : road_from_ego_(), timestamp_(0) {}

  /// Throws InvalidArgument when the road z-axis points away from the ego
  /// up direction.
  explicit RoadFrame(const RigidTransform& road_from_ego, int timestamp = 0);

  const RigidTransform& road_from_ego() const { return road_from_ego_; }
  RigidTransform ego_from_road() const { return invert(road_from_ego_); }
  int timestamp() const { return timestamp_; }

 private:
  RigidTransform road_from_ego_;
  int timestamp_;
};

/// Road frame whose origin is the camera center dropped camera_height along
/// the plane normal, whose z-axis is the plane normal, and whose y-axis is
/// the camera viewing direction projected into the plane. camera_pitch is
/// the downward angle of the optical axis relative to the plane, measured in
/// the camera's vertical plane. Throws NumericalError when the optical axis
/// is (nearly) parallel to the normal.
RoadFrame road_frame_from_camera(const CameraModel& cam, double camera_height,
                                 double camera_pitch, int timestamp = 0);

/// Camera-from-road transform for a given frame.
RigidTransform camera_from_road(const CameraModel& cam, const RoadFrame& frame);

}  // namespace heightlab
