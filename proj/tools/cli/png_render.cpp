#include "png_render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "heightlab/error.hpp"

namespace heightlab::cli {
namespace {

constexpr int kScale = 2;
constexpr int kGap = 4;
constexpr int kBarWidth = 12;
constexpr double kRange = 2.0;

struct Stop {
  double h;
  std::array<double, 3> rgb;
};

constexpr std::array<Stop, 5> kStops = {{{-2.0, {49, 54, 149}},
                                         {-1.0, {116, 173, 209}},
                                         {0.0, {255, 255, 191}},
                                         {1.0, {244, 109, 67}},
                                         {2.0, {165, 0, 38}}}};

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::array<std::uint8_t, 3> RgbImage::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

std::array<std::uint8_t, 3> height_color(double h) {
  h = std::clamp(h, -kRange, kRange);
  std::size_t k = 0;
  while (k + 2 < kStops.size() && h > kStops[k + 1].h) ++k;
  const Stop& a = kStops[k];
  const Stop& b = kStops[k + 1];
  const double t = (h - a.h) / (b.h - a.h);
  std::array<std::uint8_t, 3> out{};
  for (int ch = 0; ch < 3; ++ch) {
    out[ch] = static_cast<std::uint8_t>(std::lround(a.rgb[ch] + t * (b.rgb[ch] - a.rgb[ch])));
  }
  return out;
}

RgbImage render_heightmap(const HeightMap& map) {
  RgbImage img;
  const int map_w = map.cols() * kScale;
  img.width = map_w + kGap + kBarWidth;
  img.height = map.rows() * kScale;
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);
  const auto put = [&](int x, int y, const std::array<std::uint8_t, 3>& c) {
    const std::size_t i = (static_cast<std::size_t>(y) * img.width + x) * 3;
    img.pixels[i] = c[0];
    img.pixels[i + 1] = c[1];
    img.pixels[i + 2] = c[2];
  };
  for (int r = 0; r < map.rows(); ++r) {
    const int y0 = (map.rows() - 1 - r) * kScale;
    for (int c = 0; c < map.cols(); ++c) {
      const auto color = map.valid(r, c) ? height_color(map.at(r, c)) : kNoDataColor;
      for (int dy = 0; dy < kScale; ++dy) {
        for (int dx = 0; dx < kScale; ++dx) put(c * kScale + dx, y0 + dy, color);
      }
    }
  }
  for (int y = 0; y < img.height; ++y) {
    const double h = img.height > 1 ? kRange - 2.0 * kRange * y / (img.height - 1) : 0.0;
    const auto color = height_color(h);
    for (int x = map_w + kGap; x < img.width; ++x) put(x, y, color);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed for '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("write error on '" + path.string() + "'");
}

RgbImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open '" + path.string() + "' for reading");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("'" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  RgbImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG decoding failed for '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("'" + path.string() + "' is not an 8-bit RGB PNG");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace heightlab::cli
