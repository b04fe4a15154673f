#include "heightlab/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "heightlab/error.hpp"
#include "heightlab/numeric.hpp"
#include "heightlab/parallel.hpp"

namespace heightlab {
namespace {

using nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kNoiseSpacing = 16;  // pixels between value-noise lattice nodes
constexpr std::uint64_t kPhaseStream = 0x70686173ULL;

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(std::string("SceneSpec: ") + what);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("SceneSpec: field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, unused] : obj.items()) {
    if (!known.contains(key)) throw DataError(std::string("SceneSpec: unknown key '") + key + "' in " + where);
  }
}

const json& object_or_empty(const json& doc, const char* key) {
  static const json empty = json::object();
  if (!doc.contains(key)) return empty;
  if (!doc.at(key).is_object()) throw DataError(std::string("SceneSpec: '") + key + "' must be an object");
  return doc.at(key);
}

// Arc length of the x = 0 profile between y0 and y1 (5-point Gauss-Legendre
// on sub-intervals of at most 1 m).
double profile_arc_length(const Surface& s, double y0, double y1) {
  static constexpr std::array<double, 5> kNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                                   0.5384693101056831, 0.9061798459386640};
  static constexpr std::array<double, 5> kWeights = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                     0.4786286704993665, 0.2369268850561891};
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(y1 - y0))));
  const double h = (y1 - y0) / pieces;
  double total = 0.0;
  for (int p = 0; p < pieces; ++p) {
    const double mid = y0 + (p + 0.5) * h;
    for (int k = 0; k < 5; ++k) {
      const double dy = s.gradient(0.0, mid + 0.5 * h * kNodes[k]).y();
      total += 0.5 * h * kWeights[k] * std::sqrt(1.0 + dy * dy);
    }
  }
  return total;
}

// y such that the profile arc length from y0 equals distance.
double advance_along_profile(const Surface& s, double y0, double distance) {
  if (distance == 0.0) return y0;
  double y = y0 + distance;
  for (int it = 0; it < 50; ++it) {
    const double dy = s.gradient(0.0, y).y();
    const double step = (profile_arc_length(s, y0, y) - distance) / std::sqrt(1.0 + dy * dy);
    y -= step;
    if (std::abs(step) < 1e-13) break;
  }
  return y;
}

struct RayHit {
  bool hit = false;
  double depth = 0.0;  // camera z
  Vec3 world;
};

// Marches x(s) = o + s d (d has camera-frame z = 1, so s is camera depth).
RayHit cast_ray(const Surface& surface, const Vec3& o, const Vec3& d, const Vec3& o_road, const Vec3& d_road,
                const BevGrid& grid, double max_gradient) {
  RayHit out;
  // Parameter interval where the ray is above the grid extent in road xy.
  double s_lo = 0.0, s_hi = std::numeric_limits<double>::infinity();
  const double lo[2] = {grid.x_min, grid.y_min};
  const double hi[2] = {grid.x_max(), grid.y_max()};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(d_road[k]) < 1e-15) {
      if (o_road[k] < lo[k] || o_road[k] > hi[k]) return out;
      continue;
    }
    double a = (lo[k] - o_road[k]) / d_road[k];
    double b = (hi[k] - o_road[k]) / d_road[k];
    if (a > b) std::swap(a, b);
    s_lo = std::max(s_lo, a);
    s_hi = std::min(s_hi, b);
  }
  if (!(s_hi > s_lo)) return out;

  const double len = d.norm();
  const double horizontal = std::hypot(d.x(), d.y());
  const double ds = kRayStep / len;
  const auto gap = [&](double s) {
    const Vec3 p = o + s * d;
    return p.z() - surface.height(p.x(), p.y());
  };

  double s_prev = 0.0;
  double f_prev = gap(0.0);
  if (!(f_prev > 0.0)) return out;  // camera at or below the surface
  const bool can_never_descend = d.z() >= max_gradient * horizontal;
  if (can_never_descend) return out;

  double s = 0.0;
  bool bracketed = false;
  while (s < s_hi) {
    s = std::min(s + ds, s_hi);
    const double f = gap(s);
    if (f <= 0.0) {
      bracketed = true;
      break;
    }
    s_prev = s;
    f_prev = f;
  }
  if (!bracketed) return out;

  double a = s_prev, b = s;
  while ((b - a) * len > kRayTolerance) {
    const double m = 0.5 * (a + b);
    (gap(m) > 0.0 ? a : b) = m;
  }
  // Newton polish inside the bracket.
  double root = 0.5 * (a + b);
  for (int it = 0; it < 4; ++it) {
    const Vec3 p = o + root * d;
    const Vec2 g = surface.gradient(p.x(), p.y());
    const double slope = d.z() - g.x() * d.x() - g.y() * d.y();
    if (std::abs(slope) < 1e-12) break;
    const double next = root - gap(root) / slope;
    if (!(next >= a && next <= b)) break;
    root = next;
  }
  if (root < s_lo || root > s_hi) return out;

  out.hit = true;
  out.depth = root;
  out.world = o + root * d;
  return out;
}

double value_noise(std::uint64_t key, int col, int row) {
  const int gx = col / kNoiseSpacing, gy = row / kNoiseSpacing;
  const double fx = static_cast<double>(col % kNoiseSpacing) / kNoiseSpacing;
  const double fy = static_cast<double>(row % kNoiseSpacing) / kNoiseSpacing;
  const auto node = [&](int x, int y) {
    return hash_uniform_signed(key, (static_cast<std::uint64_t>(y) << 32) | static_cast<std::uint32_t>(x));
  };
  return (1 - fy) * ((1 - fx) * node(gx, gy) + fx * node(gx + 1, gy)) +
         fy * ((1 - fx) * node(gx, gy + 1) + fx * node(gx + 1, gy + 1));
}

}  // namespace

std::string_view to_string(SurfaceKind kind) {
  switch (kind) {
    case SurfaceKind::flat: return "flat";
    case SurfaceKind::grade: return "grade";
    case SurfaceKind::crest: return "crest";
    case SurfaceKind::bank: return "bank";
    case SurfaceKind::composite: return "composite";
  }
  return "flat";
}

SurfaceKind surface_kind_from_string(std::string_view name) {
  for (SurfaceKind k : {SurfaceKind::flat, SurfaceKind::grade, SurfaceKind::crest, SurfaceKind::bank,
                        SurfaceKind::composite}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("SceneSpec: unknown surface kind '" + std::string(name) + "'");
}

CameraModel CameraRig::camera() const {
  return CameraModel(intrinsics, camera_mount(mount_height, forward_offset, pitch));
}

Surface::Surface(SurfaceKind kind, const SurfaceParams& params) : kind_(kind), params_(params) {}

double Surface::height(double x, double y) const {
  const SurfaceParams& p = params_;
  const auto crest = [&] { return p.amplitude * std::sin(kTwoPi * y / p.wavelength + p.phase); };
  switch (kind_) {
    case SurfaceKind::flat: return 0.0;
    case SurfaceKind::grade: return p.grade * y;
    case SurfaceKind::crest: return crest();
    case SurfaceKind::bank: return p.bank * x;
    case SurfaceKind::composite: return p.grade * y + crest() + p.bank * x;
  }
  return 0.0;
}

Vec2 Surface::gradient(double x, double y) const {
  (void)x;
  const SurfaceParams& p = params_;
  const auto crest_dy = [&] {
    return p.amplitude * kTwoPi / p.wavelength * std::cos(kTwoPi * y / p.wavelength + p.phase);
  };
  switch (kind_) {
    case SurfaceKind::flat: return {0.0, 0.0};
    case SurfaceKind::grade: return {0.0, p.grade};
    case SurfaceKind::crest: return {0.0, crest_dy()};
    case SurfaceKind::bank: return {p.bank, 0.0};
    case SurfaceKind::composite: return {p.bank, p.grade + crest_dy()};
  }
  return {0.0, 0.0};
}

double Surface::max_gradient() const {
  const SurfaceParams& p = params_;
  const double crest = p.wavelength > 0.0 ? std::abs(p.amplitude) * kTwoPi / p.wavelength : 0.0;
  switch (kind_) {
    case SurfaceKind::flat: return 0.0;
    case SurfaceKind::grade: return std::abs(p.grade);
    case SurfaceKind::crest: return crest;
    case SurfaceKind::bank: return std::abs(p.bank);
    case SurfaceKind::composite: return std::hypot(std::abs(p.grade) + crest, p.bank);
  }
  return 0.0;
}

void SceneSpec::validate() const {
  const SurfaceParams& p = params;
  for (double v : {p.grade, p.amplitude, p.wavelength, p.phase, p.bank, ego_speed, frame_dt, start_y,
                   rig.mount_height, rig.forward_offset, rig.pitch}) {
    require(std::isfinite(v), "all numeric fields must be finite");
  }
  require(std::abs(p.grade) <= kMaxGrade, "|grade| must be <= 0.15");
  require(p.amplitude >= 0.0 && p.amplitude <= kMaxAmplitude, "crest amplitude must lie in [0, 2] m");
  require(p.wavelength > 0.0, "crest wavelength must be positive");
  require(Surface(surface_kind, p).max_gradient() <= kMaxSurfaceGradient + 1e-12,
          "surface gradient exceeds 0.2");
  require(length >= 1 && length <= 100000, "length must lie in [1, 100000]");
  require(ego_speed >= 0.0, "ego_speed must be >= 0");
  require(frame_dt > 0.0, "frame_dt must be positive");
  require(channels >= 2 && channels <= 256, "channels must lie in [2, 256]");
  require(rig.mount_height > 0.0, "camera mount height must be positive");
  require(std::abs(rig.pitch) < std::numbers::pi / 2, "camera pitch must lie in (-90, 90) degrees");
  grid.validate();
  (void)rig.camera();
}

SceneSpec parse_scene_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("SceneSpec: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("SceneSpec: document must be a JSON object");

  SceneSpec spec;
  std::set<std::string> top;
  std::string kind = std::string(to_string(spec.surface_kind));
  read_field(doc, "surface_kind", kind, top);
  spec.surface_kind = surface_kind_from_string(kind);
  read_field(doc, "seed", spec.seed, top);
  read_field(doc, "length", spec.length, top);
  read_field(doc, "ego_speed", spec.ego_speed, top);
  read_field(doc, "frame_dt", spec.frame_dt, top);
  read_field(doc, "start_y", spec.start_y, top);
  read_field(doc, "channels", spec.channels, top);
  top.insert({"params", "camera", "grid"});
  reject_unknown(doc, top, "scene spec");

  const json& params = object_or_empty(doc, "params");
  std::set<std::string> pk;
  read_field(params, "grade", spec.params.grade, pk);
  read_field(params, "amplitude", spec.params.amplitude, pk);
  read_field(params, "wavelength", spec.params.wavelength, pk);
  read_field(params, "phase", spec.params.phase, pk);
  read_field(params, "bank", spec.params.bank, pk);
  reject_unknown(params, pk, "params");
  if (spec.surface_kind == SurfaceKind::composite && !params.contains("phase")) {
    spec.params.phase = std::numbers::pi * hash_uniform_signed(spec.seed, kPhaseStream);
  }

  const json& camera = object_or_empty(doc, "camera");
  std::set<std::string> ck;
  Intrinsics& k = spec.rig.intrinsics;
  read_field(camera, "fx", k.fx, ck);
  read_field(camera, "fy", k.fy, ck);
  read_field(camera, "cx", k.cx, ck);
  read_field(camera, "cy", k.cy, ck);
  read_field(camera, "width", k.width, ck);
  read_field(camera, "height", k.height, ck);
  read_field(camera, "mount_height", spec.rig.mount_height, ck);
  read_field(camera, "forward_offset", spec.rig.forward_offset, ck);
  read_field(camera, "pitch", spec.rig.pitch, ck);
  reject_unknown(camera, ck, "camera");

  const json& grid = object_or_empty(doc, "grid");
  std::set<std::string> gk;
  read_field(grid, "rows", spec.grid.rows, gk);
  read_field(grid, "cols", spec.grid.cols, gk);
  read_field(grid, "meters_per_pixel", spec.grid.meters_per_pixel, gk);
  read_field(grid, "x_min", spec.grid.x_min, gk);
  read_field(grid, "y_min", spec.grid.y_min, gk);
  reject_unknown(grid, gk, "grid");

  spec.validate();
  return spec;
}

std::string scene_spec_to_json(const SceneSpec& spec) {
  const Intrinsics& k = spec.rig.intrinsics;
  json doc = {
      {"surface_kind", std::string(to_string(spec.surface_kind))},
      {"params",
       {{"grade", spec.params.grade},
        {"amplitude", spec.params.amplitude},
        {"wavelength", spec.params.wavelength},
        {"phase", spec.params.phase},
        {"bank", spec.params.bank}}},
      {"seed", spec.seed},
      {"length", spec.length},
      {"ego_speed", spec.ego_speed},
      {"frame_dt", spec.frame_dt},
      {"start_y", spec.start_y},
      {"channels", spec.channels},
      {"camera",
       {{"fx", k.fx},
        {"fy", k.fy},
        {"cx", k.cx},
        {"cy", k.cy},
        {"width", k.width},
        {"height", k.height},
        {"mount_height", spec.rig.mount_height},
        {"forward_offset", spec.rig.forward_offset},
        {"pitch", spec.rig.pitch}}},
      {"grid",
       {{"rows", spec.grid.rows},
        {"cols", spec.grid.cols},
        {"meters_per_pixel", spec.grid.meters_per_pixel},
        {"x_min", spec.grid.x_min},
        {"y_min", spec.grid.y_min}}},
  };
  return doc.dump(2) + "\n";
}

Surface gen_surface(const SceneSpec& spec) {
  spec.validate();
  return Surface(spec.surface_kind, spec.params);
}

Trajectory gen_trajectory(const SceneSpec& spec, const Surface& surface) {
  const CameraModel cam = spec.rig.camera();
  const double step = spec.ego_speed * spec.frame_dt;
  Trajectory traj;
  double y = spec.start_y;
  for (int k = 0; k < spec.length; ++k) {
    if (k > 0) y = advance_along_profile(surface, y, step);
    ScenePose pose;
    pose.world_from_ego = RigidTransform::translation(0.0, y, surface.height(0.0, y));
    const double camera_height =
        surface.height(0.0, y) + spec.rig.mount_height - surface.height(0.0, y + spec.rig.forward_offset);
    pose.frame = road_frame_from_camera(cam, camera_height, spec.rig.pitch, k);
    pose.world_from_road = compose(pose.world_from_ego, pose.frame.ego_from_road());
    traj.ego_motion.push_back(k == 0 ? RigidTransform::identity()
                                     : compose(invert(pose.world_from_ego), traj.poses.back().world_from_ego));
    traj.poses.push_back(pose);
  }
  return traj;
}

SurfaceFunction road_surface(const Surface& surface, const RigidTransform& world_from_road) {
  if (std::abs(world_from_road.rotation()(2, 2) - 1.0) > 1e-9) {
    throw InvalidArgument("road_surface: only level road frames are supported");
  }
  return [surface, world_from_road](double x, double y) {
    const Vec3 p = world_from_road.apply(Vec3(x, y, 0.0));
    return surface.height(p.x(), p.y()) - world_from_road.translation().z();
  };
}

HeightMap ground_truth_heightmap(const Surface& surface, const ScenePose& pose, const BevGrid& grid) {
  return rasterize_surface(grid, road_surface(surface, pose.world_from_road), pose.frame);
}

FrameRender render_frame(const Surface& surface, const ScenePose& pose, const CameraModel& cam,
                         const BevGrid& grid) {
  const int h = cam.height(), w = cam.width();
  FrameRender out{GroundMask(h, w), FeatureGrid(h, w, 1), FeatureGrid(h, w, 1)};

  const RigidTransform world_from_camera = compose(pose.world_from_ego, invert(cam.camera_from_ego()));
  const RigidTransform road_from_world = invert(pose.world_from_road);
  const Vec3 o = world_from_camera.translation();
  const Vec3 o_road = road_from_world.apply(o);
  const Vec2 road_y_axis = pose.world_from_road.rotation().col(1).head<2>();
  const double max_gradient = surface.max_gradient();

  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int j = static_cast<int>(row);
    for (int i = 0; i < w; ++i) {
      const Vec3 d = world_from_camera.rotation() * cam.pixel_ray(i, j);
      const Vec3 d_road = road_from_world.rotation() * d;
      const RayHit hit = cast_ray(surface, o, d, o_road, d_road, grid, max_gradient);
      if (!hit.hit) continue;
      out.mask.at(j, i) = 1;
      out.depth.at(j, i) = hit.depth;
      out.grade.at(j, i) = surface.gradient(hit.world.x(), hit.world.y()).dot(road_y_axis);
    }
  });
  return out;
}

GroundMask render_ground_mask(const Surface& surface, const ScenePose& pose, const CameraModel& cam,
                              const BevGrid& grid) {
  return render_frame(surface, pose, cam, grid).mask;
}

FeatureGrid render_feature_grid(const FrameRender& render, int channels, std::uint64_t seed, int frame_index) {
  if (channels < 2) throw InvalidArgument("render_feature_grid: at least two channels are required");
  const int h = render.mask.rows(), w = render.mask.cols();
  FeatureGrid feat(h, w, channels);
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(channels));
  for (int ch = 2; ch < channels; ++ch) {
    keys[ch] = hash_mix(hash_mix(seed, static_cast<std::uint64_t>(frame_index)), static_cast<std::uint64_t>(ch));
  }
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int j = static_cast<int>(row);
    for (int i = 0; i < w; ++i) {
      auto cell = feat.cell(j, i);
      const bool ground = render.mask.at(j, i) != 0;
      cell[0] = ground ? 1.0 : 0.0;
      cell[1] = ground ? render.grade.at(j, i) / kMaxGrade : 0.0;
      for (int ch = 2; ch < channels; ++ch) cell[ch] = value_noise(keys[ch], i, j);
    }
  });
  return feat;
}

FeatureGrid render_feature_grid(const Surface& surface, const ScenePose& pose, const CameraModel& cam,
                                const BevGrid& grid, int channels, std::uint64_t seed) {
  if (channels < 2) throw InvalidArgument("render_feature_grid: at least two channels are required");
  return render_feature_grid(render_frame(surface, pose, cam, grid), channels, seed, pose.frame.timestamp());
}

HeightMap height_from_depth(const FeatureGrid& depth, const GroundMask& seg, const RoadFrame& frame,
                            const CameraModel& cam, const BevGrid& grid, DepthAccumulation mode) {
  if (depth.rows() != seg.rows() || depth.cols() != seg.cols() || depth.channels() != 1) {
    throw InvalidArgument("height_from_depth: depth and mask sizes differ");
  }
  grid.validate();
  const RigidTransform road_from_camera = compose(frame.road_from_ego(), invert(cam.camera_from_ego()));

  std::vector<std::vector<double>> samples(grid.cell_count());
  for (int j = 0; j < seg.rows(); ++j) {
    for (int i = 0; i < seg.cols(); ++i) {
      const double z = depth.at(j, i);
      if (!seg.at(j, i) || !(z > 0.0) || !std::isfinite(z)) continue;
      const Vec3 p = road_from_camera.apply(z * cam.pixel_ray(i, j));
      int r = 0, c = 0;
      if (!grid.locate(p.x(), p.y(), r, c)) continue;
      samples[static_cast<std::size_t>(r) * grid.cols + c].push_back(p.z());
    }
  }

  HeightMap out(grid, 0.0, frame);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      auto& s = samples[static_cast<std::size_t>(r) * grid.cols + c];
      if (s.empty()) {
        out.set_nodata(r, c);
        continue;
      }
      if (mode == DepthAccumulation::mean) {
        out.set(r, c, pairwise_sum(s) / static_cast<double>(s.size()));
      } else {
        std::sort(s.begin(), s.end());
        const std::size_t n = s.size();
        out.set(r, c, n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]));
      }
    }
  }
  return out;
}

Scene generate_scene(const SceneSpec& spec) {
  const Surface surface = gen_surface(spec);
  Scene scene{spec, surface, spec.rig.camera(), gen_trajectory(spec, surface), {}};
  scene.frames.reserve(scene.trajectory.poses.size());
  for (const ScenePose& pose : scene.trajectory.poses) {
    FrameData fd{pose, render_frame(surface, pose, scene.camera, spec.grid), {}, {}};
    fd.features = render_feature_grid(fd.render, spec.channels, spec.seed, pose.frame.timestamp());
    fd.ground_truth = ground_truth_heightmap(surface, pose, spec.grid);
    scene.frames.push_back(std::move(fd));
  }
  return scene;
}

}  // namespace heightlab
