#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "heightlab/geometry.hpp"
#include "heightlab/heightgrid.hpp"
#include "heightlab/raster.hpp"

namespace heightlab {

enum class SurfaceKind { flat, grade, crest, bank, composite };

std::string_view to_string(SurfaceKind kind);
SurfaceKind surface_kind_from_string(std::string_view name);

/// Surface coefficients. Which ones apply depends on the kind:
/// grade -> grade; crest -> amplitude, wavelength, phase; bank -> bank;
/// composite -> all of them.
struct SurfaceParams {
  double grade = 0.0;        // dh/dy
  double amplitude = 0.0;    // m
  double wavelength = 80.0;  // m
  double phase = 0.0;        // rad
  double bank = 0.0;         // dh/dx

  bool operator==(const SurfaceParams&) const = default;
};

/// Camera mounted on the (level) ego vehicle.
struct CameraRig {
  Intrinsics intrinsics{160.0, 160.0, 160.0, 80.0, 320, 160};
  double mount_height = 1.5;    // above the rear-axle contact point (m)
  double forward_offset = 1.5;  // rear axle to camera, along ego y (m)
  double pitch = 0.05235987755982988;  // 3 degrees down

  CameraModel camera() const;

  bool operator==(const CameraRig&) const = default;
};

/// Maximum grade magnitude; also the normalisation of feature channel 1.
inline constexpr double kMaxGrade = 0.15;
inline constexpr double kMaxAmplitude = 2.0;
inline constexpr double kMaxSurfaceGradient = 0.2;

struct SceneSpec {
  SurfaceKind surface_kind = SurfaceKind::flat;
  SurfaceParams params;
  std::uint64_t seed = 0;
  int length = 1;           // frames
  double ego_speed = 10.0;  // m/s
  double frame_dt = 0.1;    // s
  double start_y = 0.0;     // world y of the rear axle at frame 0
  int channels = 8;         // feature channels
  CameraRig rig;
  BevGrid grid;

  /// Throws InvalidArgument when a field is out of range or the surface
  /// would exceed the gradient bound.
  void validate() const;

  bool operator==(const SceneSpec&) const = default;
};

/// Parses a SceneSpec JSON document (missing fields keep their defaults).
/// Composite surfaces without an explicit phase get one drawn from the seed.
/// Unknown keys are rejected. Throws DataError on malformed JSON and InvalidArgument on bad values.
SceneSpec parse_scene_spec(std::string_view json_text);

/// Fully resolved JSON document; parse_scene_spec(scene_spec_to_json(s)) == s.
std::string scene_spec_to_json(const SceneSpec& spec);

/// Continuous world-frame height field with analytic gradient.
class Surface {
 public:
  Surface(SurfaceKind kind, const SurfaceParams& params);

  double height(double x, double y) const;
  Vec2 gradient(double x, double y) const;
  /// Upper bound of |grad h| over the plane.
  double max_gradient() const;

  SurfaceKind kind() const { return kind_; }
  const SurfaceParams& params() const { return params_; }

 private:
  SurfaceKind kind_;
  SurfaceParams params_;
};

/// Throws InvalidArgument for an invalid spec.
Surface gen_surface(const SceneSpec& spec);

/// Poses of one frame. The ego frame is gravity-level with heading +y, the
/// road frame is derived from the camera (see road_frame_from_camera).
struct ScenePose {
  RoadFrame frame;
  RigidTransform world_from_ego;
  RigidTransform world_from_road;
};

struct Trajectory {
  std::vector<ScenePose> poses;
  /// ego_motion[k] maps ego(k-1) coordinates into ego(k); ego_motion[0] is
  /// the identity.
  std::vector<RigidTransform> ego_motion;
};

/// The ego advances ego_speed * frame_dt of arc length per frame along the
/// surface profile under x = 0.
Trajectory gen_trajectory(const SceneSpec& spec, const Surface& surface);

/// The surface expressed in a level road frame: h_road(x, y).
SurfaceFunction road_surface(const Surface& surface, const RigidTransform& world_from_road);

/// Ground-truth height map of one frame.
HeightMap ground_truth_heightmap(const Surface& surface, const ScenePose& pose, const BevGrid& grid);

/// Image-space renderings of one frame, computed from one ray cast per pixel
/// (rays through integer pixel coordinates).
struct FrameRender {
  GroundMask mask;
  FeatureGrid depth;          // camera-frame z of the hit, 0 where no hit
  FeatureGrid grade;          // road-longitudinal surface grade at the hit
};

/// Ray march step and bisection tolerance (meters along the ray).
inline constexpr double kRayStep = 0.25;
inline constexpr double kRayTolerance = 1e-4;

FrameRender render_frame(const Surface& surface, const ScenePose& pose, const CameraModel& cam, const BevGrid& grid);

/// Pixel set iff its ray meets the surface inside the grid extent.
GroundMask render_ground_mask(const Surface& surface, const ScenePose& pose, const CameraModel& cam,
                              const BevGrid& grid);

/// Channel 0: ground indicator. Channel 1: grade / kMaxGrade on ground, 0
/// elsewhere. Channels 2..C-1: seeded value noise (lattice spacing 16 px)
/// keyed by (seed, frame timestamp, channel). Throws InvalidArgument for
/// channels < 2.
FeatureGrid render_feature_grid(const FrameRender& render, int channels, std::uint64_t seed, int frame_index);
FeatureGrid render_feature_grid(const Surface& surface, const ScenePose& pose, const CameraModel& cam,
                                const BevGrid& grid, int channels, std::uint64_t seed);

enum class DepthAccumulation { mean, median };

/// Back-projects every masked pixel with positive depth into the road frame
/// and accumulates heights per BEV cell. Cells without samples are no-data.
HeightMap height_from_depth(const FeatureGrid& depth, const GroundMask& seg, const RoadFrame& frame,
                            const CameraModel& cam, const BevGrid& grid,
                            DepthAccumulation mode = DepthAccumulation::mean);

/// Everything the tools need for one generated frame.
struct FrameData {
  ScenePose pose;
  FrameRender render;
  FeatureGrid features;
  HeightMap ground_truth;
};

struct Scene {
  SceneSpec spec;
  Surface surface;
  CameraModel camera;
  Trajectory trajectory;
  std::vector<FrameData> frames;
};

Scene generate_scene(const SceneSpec& spec);

}  // namespace heightlab
