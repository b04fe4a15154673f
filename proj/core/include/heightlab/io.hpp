#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heightlab/geometry.hpp"
#include "heightlab/heightgrid.hpp"
#include "heightlab/raster.hpp"

namespace heightlab {

// HGT1: 8-byte magic "HGT1\n   ", six little-endian float64 header fields
// (rows, cols, mpp, x_min, y_min, nodata sentinel), then rows * cols
// little-endian float32 values in row-major order. No-data cells hold the
// sentinel (NaN by default).

inline constexpr std::string_view kHgt1Magic{"HGT1\n   ", 8};

std::string encode_hgt1(const HeightMap& map, double nodata = std::numeric_limits<double>::quiet_NaN());
/// Throws DataError on a bad magic, a bad header or a truncated payload.
HeightMap decode_hgt1(std::string_view bytes);

void write_hgt1(const std::filesystem::path& path, const HeightMap& map,
                double nodata = std::numeric_limits<double>::quiet_NaN());
HeightMap read_hgt1(const std::filesystem::path& path);

// Image rasters (depth, features) reuse the container: the channel planes are
// stacked vertically (rows = H * C), mpp stores C, x_min = y_min = 0.
std::string encode_image_raster(const FeatureGrid& raster);
FeatureGrid decode_image_raster(std::string_view bytes);
void write_image_raster(const std::filesystem::path& path, const FeatureGrid& raster);
FeatureGrid read_image_raster(const std::filesystem::path& path);

// Binary PGM (P5), 255 = ground, 0 = background.
std::string encode_pgm(const GroundMask& mask);
GroundMask decode_pgm(std::string_view bytes);
void write_pgm(const std::filesystem::path& path, const GroundMask& mask);
GroundMask read_pgm(const std::filesystem::path& path);

// Pose text: one transform per line as 12 decimals (row-major 3x4 [R|t]),
// '#' starts a comment. Values are written in shortest round-trip form.
std::string encode_poses(std::span<const RigidTransform> poses);
std::vector<RigidTransform> decode_poses(std::string_view text);
void write_poses(const std::filesystem::path& path, std::span<const RigidTransform> poses);
std::vector<RigidTransform> read_poses(const std::filesystem::path& path);

/// Whole-file helpers; throw IoError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace heightlab
