#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "heightlab/heightgrid.hpp"

namespace heightlab::cli {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  std::array<std::uint8_t, 3> at(int x, int y) const;
};

/// Piecewise-linear diverging map over [-2, 2] m (clamped outside).
std::array<std::uint8_t, 3> height_color(double h);
inline constexpr std::array<std::uint8_t, 3> kNoDataColor{128, 128, 128};

/// Each cell becomes a 2x2 block, far rows (large y) on top; a colorbar for
/// [-2, 2] m is appended on the right.
RgbImage render_heightmap(const HeightMap& map);

/// Throws IoError on failure. Output carries no timestamp chunks.
void write_png(const std::filesystem::path& path, const RgbImage& image);
/// Decodes 8-bit RGB PNGs. Throws DataError / IoError.
RgbImage read_png(const std::filesystem::path& path);

}  // namespace heightlab::cli
