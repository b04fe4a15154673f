#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "heightlab/geometry.hpp"
#include "heightlab/heightgrid.hpp"
#include "heightlab/raster.hpp"
#include "heightlab/synth.hpp"

namespace heightlab::cli {

namespace fs = std::filesystem;

/// File name of frame k for a bundle prefix ("gt", "mask", ...).
std::string frame_file(const std::string& prefix, int k, const std::string& ext);

/// Scene bundle layout:
///   scene.json       resolved SceneSpec
///   poses.txt        road <- ego per frame
///   ego_motion.txt   ego(k) <- ego(k-1) per frame, identity first
///   mask_%04d.pgm    ground masks
///   feat_%04d.hgt    image feature rasters (channel planes stacked)
///   depth_%04d.hgt   camera-z depth rasters, 0 off ground
///   gt_%04d.hgt      ground-truth heightmaps
/// Returns the written file names (relative to dir).
std::vector<std::string> write_bundle(const Scene& scene, const fs::path& dir);

struct LoadedScene {
  SceneSpec spec;
  std::vector<RoadFrame> frames;
  std::vector<RigidTransform> ego_motion;
  std::vector<GroundMask> masks;
  std::vector<FeatureGrid> features;
  std::vector<HeightMap> ground_truth;

  int size() const { return static_cast<int>(frames.size()); }
  CameraModel camera() const { return spec.rig.camera(); }
};

/// Throws DataError when files are missing or inconsistent.
LoadedScene load_bundle(const fs::path& dir);

/// Sorted gt_*.hgt / pred_*.hgt style listing: (frame index, path).
std::vector<std::pair<int, fs::path>> list_frames(const fs::path& dir, const std::string& prefix,
                                                  const std::string& ext);

void ensure_directory(const fs::path& dir);

}  // namespace heightlab::cli
