#include "bundle.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>

#include "heightlab/error.hpp"
#include "heightlab/io.hpp"

namespace heightlab::cli {

std::string frame_file(const std::string& prefix, int k, const std::string& ext) {
  return fmt::format("{}_{:04d}.{}", prefix, k, ext);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

std::vector<std::string> write_bundle(const Scene& scene, const fs::path& dir) {
  ensure_directory(dir);
  std::vector<std::string> files;
  const auto emit = [&](const std::string& name) {
    files.push_back(name);
    return dir / name;
  };

  write_text_file(emit("scene.json"), scene_spec_to_json(scene.spec));
  std::vector<RigidTransform> poses;
  for (const FrameData& f : scene.frames) poses.push_back(f.pose.frame.road_from_ego());
  write_poses(emit("poses.txt"), poses);
  write_poses(emit("ego_motion.txt"), scene.trajectory.ego_motion);

  for (int k = 0; k < static_cast<int>(scene.frames.size()); ++k) {
    const FrameData& f = scene.frames[k];
    write_pgm(emit(frame_file("mask", k, "pgm")), f.render.mask);
    write_image_raster(emit(frame_file("feat", k, "hgt")), f.features);
    write_image_raster(emit(frame_file("depth", k, "hgt")), f.render.depth);
    write_hgt1(emit(frame_file("gt", k, "hgt")), f.ground_truth);
  }
  return files;
}

LoadedScene load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("scene directory '" + dir.string() + "' does not exist");
  LoadedScene s;
  s.spec = parse_scene_spec(read_text_file(dir / "scene.json"));
  const auto poses = read_poses(dir / "poses.txt");
  s.ego_motion = read_poses(dir / "ego_motion.txt");
  if (poses.size() != s.ego_motion.size() || poses.empty()) {
    throw DataError("scene bundle: poses.txt and ego_motion.txt disagree in length");
  }
  const CameraModel cam = s.camera();
  for (int k = 0; k < static_cast<int>(poses.size()); ++k) {
    s.frames.emplace_back(poses[k], k);
    s.masks.push_back(read_pgm(dir / frame_file("mask", k, "pgm")));
    s.features.push_back(read_image_raster(dir / frame_file("feat", k, "hgt")));
    HeightMap gt = read_hgt1(dir / frame_file("gt", k, "hgt"));
    gt.set_frame(s.frames.back());
    s.ground_truth.push_back(std::move(gt));

    if (s.masks.back().rows() != cam.height() || s.masks.back().cols() != cam.width() ||
        s.features.back().rows() != cam.height() || s.features.back().cols() != cam.width()) {
      throw DataError(fmt::format("scene bundle: frame {} rasters do not match the camera", k));
    }
    if (!(s.ground_truth.back().grid() == s.spec.grid)) {
      throw DataError(fmt::format("scene bundle: frame {} heightmap grid does not match scene.json", k));
    }
  }
  return s;
}

std::vector<std::pair<int, fs::path>> list_frames(const fs::path& dir, const std::string& prefix,
                                                  const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError("directory '" + dir.string() + "' does not exist");
  std::vector<std::pair<int, fs::path>> out;
  const std::string head = prefix + "_", tail = "." + ext;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() <= head.size() + tail.size() || !name.starts_with(head) || !name.ends_with(tail)) continue;
    const std::string_view digits(name.data() + head.size(), name.size() - head.size() - tail.size());
    int k = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc() || end != digits.data() + digits.size()) continue;
    out.emplace_back(k, entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace heightlab::cli
