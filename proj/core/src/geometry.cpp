#include "heightlab/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "heightlab/error.hpp"

namespace heightlab {
namespace {

constexpr double kRotationTolerance = 1e-6;
constexpr double kReorthonormalizeThreshold = 1e-7;

double orthonormality_error_of(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace

RigidTransform::RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidArgument("RigidTransform: non-finite entries");
  }
  if (orthonormality_error_of(rotation) > kRotationTolerance ||
      std::abs(rotation.determinant() - 1.0) > kRotationTolerance) {
    throw InvalidArgument("RigidTransform: rotation is not orthonormal with det +1");
  }
}

RigidTransform RigidTransform::translation(double x, double y, double z) {
  return RigidTransform(Mat3::Identity(), Vec3(x, y, z));
}

RigidTransform RigidTransform::rot_x(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return RigidTransform(r, Vec3::Zero());
}

RigidTransform RigidTransform::rot_y(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return RigidTransform(r, Vec3::Zero());
}

RigidTransform RigidTransform::rot_z(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return RigidTransform(r, Vec3::Zero());
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

std::array<double, 12> RigidTransform::to_row_major() const {
  std::array<double, 12> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[r * 4 + c] = rotation_(r, c);
    out[r * 4 + 3] = translation_(r);
  }
  return out;
}

RigidTransform RigidTransform::from_row_major(std::span<const double, 12> m) {
  Mat3 r;
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = m[i * 4 + j];
    t(i) = m[i * 4 + 3];
  }
  if (!r.allFinite() || !t.allFinite()) throw DataError("pose: non-finite entries");
  const double drift = orthonormality_error_of(r);
  if (drift > 1e-2) throw DataError("pose: rotation block is not a rotation");
  if (drift > kReorthonormalizeThreshold) r = nearest_rotation(r);
  if (r.determinant() < 0) throw DataError("pose: rotation block has negative determinant");
  return RigidTransform(r, t);
}

double RigidTransform::orthonormality_error() const { return orthonormality_error_of(rotation_); }

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

RigidTransform invert(const RigidTransform& t) {
  const Mat3 rt = t.rotation().transpose();
  return RigidTransform(rt, -(rt * t.translation()));
}

std::vector<Vec3> transform_points(const RigidTransform& t, std::span<const Vec3> pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const Vec3& p : pts) out.push_back(t.apply(p));
  return out;
}

double max_abs_difference(const RigidTransform& a, const RigidTransform& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

CameraModel::CameraModel(const Intrinsics& intrinsics, const RigidTransform& camera_from_ego)
    : intrinsics_(intrinsics), camera_from_ego_(camera_from_ego) {
  const auto& k = intrinsics_;
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw InvalidArgument("CameraModel: focal lengths must be positive");
  if (k.width <= 0 || k.height <= 0) throw InvalidArgument("CameraModel: image size must be positive");
  if (!(k.cx >= 0.0 && k.cx < k.width && k.cy >= 0.0 && k.cy < k.height)) {
    throw InvalidArgument("CameraModel: principal point outside the image");
  }
}

Vec3 CameraModel::pixel_ray(double u, double v) const {
  return {(u - intrinsics_.cx) / intrinsics_.fx, (v - intrinsics_.cy) / intrinsics_.fy, 1.0};
}

RigidTransform camera_mount(double height, double forward_offset, double pitch) {
  const double c = std::cos(pitch), s = std::sin(pitch);
  // Rows are the camera axes expressed in ego coordinates.
  Mat3 r;
  r << 1, 0, 0,   //
      0, -s, -c,  //
      0, c, -s;
  const Vec3 center(0.0, forward_offset, height);
  return RigidTransform(r, -(r * center));
}

Projection project_camera_point(const Intrinsics& k, const Vec3& p_cam) {
  Projection out;
  out.depth = p_cam.z();
  if (!(p_cam.z() > kDepthEpsilon)) return out;
  out.u = k.fx * p_cam.x() / p_cam.z() + k.cx;
  out.v = k.fy * p_cam.y() / p_cam.z() + k.cy;
  out.valid = out.u >= 0.0 && out.u <= k.width - 1 && out.v >= 0.0 && out.v <= k.height - 1;
  return out;
}

Projection project_point(const CameraModel& cam, const Vec3& p_ego) {
  return project_camera_point(cam.intrinsics(), cam.camera_from_ego().apply(p_ego));
}

std::vector<Projection> project(const CameraModel& cam, std::span<const Vec3> pts_ego) {
  std::vector<Projection> out;
  out.reserve(pts_ego.size());
  for (const Vec3& p : pts_ego) out.push_back(project_point(cam, p));
  return out;
}

RoadFrame::RoadFrame(const RigidTransform& road_from_ego, int timestamp)
    : road_from_ego_(road_from_ego), timestamp_(timestamp) {
  // Road z-axis in ego coordinates is the third row of R(road<-ego).
  if (!(road_from_ego.rotation()(2, 2) > 0.0)) {
    throw InvalidArgument("RoadFrame: road z-axis must point upward");
  }
}

RoadFrame road_frame_from_camera(const CameraModel& cam, double camera_height, double camera_pitch,
                                 int timestamp) {
  if (!(camera_height > 0.0)) throw InvalidArgument("road_frame_from_camera: camera height must be positive");

  const RigidTransform ego_from_camera = invert(cam.camera_from_ego());
  const Mat3& r = ego_from_camera.rotation();
  const Vec3 center = ego_from_camera.translation();
  const Vec3 view = r.col(2);   // optical axis
  const Vec3 up = -r.col(1);    // camera "up"

  // Rotate the camera up vector towards the optical axis by the pitch so that
  // view . normal = -sin(pitch).
  const Vec3 normal = (std::cos(camera_pitch) * up - std::sin(camera_pitch) * view).normalized();
  const Vec3 in_plane = view - view.dot(normal) * normal;
  if (in_plane.norm() < 1e-6) {
    throw NumericalError("road_frame_from_camera: viewing direction is parallel to the plane normal");
  }
  const Vec3 y_axis = in_plane.normalized();
  const Vec3 x_axis = y_axis.cross(normal);
  const Vec3 origin = center - camera_height * normal;

  Mat3 road_from_ego_r;
  road_from_ego_r.row(0) = x_axis.transpose();
  road_from_ego_r.row(1) = y_axis.transpose();
  road_from_ego_r.row(2) = normal.transpose();
  return RoadFrame(RigidTransform(road_from_ego_r, -(road_from_ego_r * origin)), timestamp);
}

RigidTransform camera_from_road(const CameraModel& cam, const RoadFrame& frame) {
  return compose(cam.camera_from_ego(), frame.ego_from_road());
}

}  // namespace heightlab
