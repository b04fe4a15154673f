#include "heightlab/io.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "heightlab/error.hpp"

namespace heightlab {
namespace detail {

std::string_view ByteReader::take(std::size_t n) {
  if (remaining() < n) throw DataError(std::string(what_) + ": truncated file");
  const std::string_view out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint64_t ByteReader::u64() {
  const std::string_view b = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}

std::uint32_t ByteReader::u32() {
  const std::string_view b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

}  // namespace detail

namespace {

using detail::ByteReader;

constexpr std::uint32_t kNanBits = 0x7FC00000u;
constexpr double kMaxDimension = 1 << 24;

int checked_dimension(double v, const char* what) {
  if (!(v >= 1.0 && v <= kMaxDimension) || v != std::floor(v)) {
    throw DataError(fmt::format("HGT1: invalid {} field", what));
  }
  return static_cast<int>(v);
}

struct Hgt1Header {
  int rows = 0;
  int cols = 0;
  double mpp = 0.0;
  double x_min = 0.0;
  double y_min = 0.0;
  double nodata = 0.0;
};

void put_value(std::string& out, double v, bool nodata_cell, double sentinel) {
  if (nodata_cell && std::isnan(sentinel)) {
    detail::put_u32(out, kNanBits);
  } else {
    detail::put_f32(out, static_cast<float>(nodata_cell ? sentinel : v));
  }
}

std::string encode_container(const Hgt1Header& h, const auto& value_at) {
  std::string out(kHgt1Magic);
  out.reserve(8 + 48 + static_cast<std::size_t>(h.rows) * h.cols * 4);
  for (double f : {static_cast<double>(h.rows), static_cast<double>(h.cols), h.mpp, h.x_min, h.y_min, h.nodata}) {
    detail::put_f64(out, f);
  }
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) value_at(out, r, c);
  }
  return out;
}

Hgt1Header decode_header(ByteReader& in) {
  if (in.take(8) != kHgt1Magic) throw DataError("HGT1: bad magic");
  Hgt1Header h;
  h.rows = checked_dimension(in.f64(), "rows");
  h.cols = checked_dimension(in.f64(), "cols");
  h.mpp = in.f64();
  h.x_min = in.f64();
  h.y_min = in.f64();
  h.nodata = in.f64();
  if (!std::isfinite(h.mpp) || !std::isfinite(h.x_min) || !std::isfinite(h.y_min)) {
    throw DataError("HGT1: non-finite header field");
  }
  const std::size_t expected = static_cast<std::size_t>(h.rows) * h.cols * 4;
  if (in.remaining() != expected) {
    throw DataError(fmt::format("HGT1: payload holds {} bytes, expected {}", in.remaining(), expected));
  }
  return h;
}

bool is_nodata(float v, double sentinel) {
  return std::isnan(sentinel) ? std::isnan(v) : static_cast<double>(v) == sentinel;
}

}  // namespace

std::string encode_hgt1(const HeightMap& map, double nodata) {
  const BevGrid& g = map.grid();
  const Hgt1Header h{g.rows, g.cols, g.meters_per_pixel, g.x_min, g.y_min, nodata};
  return encode_container(h, [&](std::string& out, int r, int c) {
    put_value(out, map.at(r, c), !map.valid(r, c), nodata);
  });
}

HeightMap decode_hgt1(std::string_view bytes) {
  ByteReader in(bytes, "HGT1");
  const Hgt1Header h = decode_header(in);
  BevGrid grid{h.rows, h.cols, h.mpp, h.x_min, h.y_min};
  try {
    grid.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("HGT1: ") + e.what());
  }
  HeightMap map(grid);
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) {
      const float v = in.f32();
      if (is_nodata(v, h.nodata)) {
        map.set_nodata(r, c);
        continue;
      }
      if (!std::isfinite(v) || std::abs(v) > HeightMap::kSanityBound) {
        throw DataError(fmt::format("HGT1: cell ({}, {}) holds an out-of-range height", r, c));
      }
      map.set(r, c, v);
    }
  }
  return map;
}

void write_hgt1(const std::filesystem::path& path, const HeightMap& map, double nodata) {
  detail::write_file(path, encode_hgt1(map, nodata));
}

HeightMap read_hgt1(const std::filesystem::path& path) { return decode_hgt1(detail::read_file(path)); }

std::string encode_image_raster(const FeatureGrid& raster) {
  const int h = raster.rows(), ch = raster.channels();
  const Hgt1Header header{h * ch, raster.cols(), static_cast<double>(ch), 0.0, 0.0,
                          std::numeric_limits<double>::quiet_NaN()};
  return encode_container(header, [&](std::string& out, int r, int c) {
    detail::put_f32(out, static_cast<float>(raster.at(r % h, c, r / h)));
  });
}

FeatureGrid decode_image_raster(std::string_view bytes) {
  ByteReader in(bytes, "HGT1");
  const Hgt1Header h = decode_header(in);
  const int ch = checked_dimension(h.mpp, "channel count");
  if (h.rows % ch != 0) throw DataError("HGT1: row count is not a multiple of the channel count");
  const int rows = h.rows / ch;
  FeatureGrid raster(rows, h.cols, ch);
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) raster.at(r % rows, c, r / rows) = in.f32();
  }
  return raster;
}

void write_image_raster(const std::filesystem::path& path, const FeatureGrid& raster) {
  detail::write_file(path, encode_image_raster(raster));
}

FeatureGrid read_image_raster(const std::filesystem::path& path) {
  return decode_image_raster(detail::read_file(path));
}

std::string encode_pgm(const GroundMask& mask) {
  std::string out = fmt::format("P5\n{} {}\n255\n", mask.cols(), mask.rows());
  for (std::uint8_t v : mask.data()) out.push_back(static_cast<char>(v ? 255 : 0));
  return out;
}

GroundMask decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  const auto next_token = [&]() -> std::string_view {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  const auto next_int = [&](const char* what) {
    const std::string_view tok = next_token();
    int v = 0;
    const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || end != tok.data() + tok.size() || v <= 0) {
      throw DataError(fmt::format("PGM: invalid {}", what));
    }
    return v;
  };

  if (next_token() != "P5") throw DataError("PGM: bad magic");
  const int w = next_int("width");
  const int h = next_int("height");
  if (next_int("maxval") != 255) throw DataError("PGM: only maxval 255 is supported");
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (pos > bytes.size() || bytes.size() - pos != n) throw DataError("PGM: payload size does not match the header");
  GroundMask mask(h, w);
  for (std::size_t i = 0; i < n; ++i) mask.data()[i] = bytes[pos + i] != 0 ? 1 : 0;
  return mask;
}

void write_pgm(const std::filesystem::path& path, const GroundMask& mask) {
  detail::write_file(path, encode_pgm(mask));
}

GroundMask read_pgm(const std::filesystem::path& path) { return decode_pgm(detail::read_file(path)); }

std::string encode_poses(std::span<const RigidTransform> poses) {
  std::string out;
  for (const RigidTransform& t : poses) {
    auto m = t.to_row_major();
    for (double& v : m) v += 0.0;  // print -0 as 0
    out += fmt::format("{}\n", fmt::join(m, " "));
  }
  return out;
}

std::vector<RigidTransform> decode_poses(std::string_view text) {
  std::vector<RigidTransform> poses;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::array<double, 12> m{};
    int count = 0;
    std::size_t pos = 0;
    while (true) {
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      if (pos >= line.size()) break;
      if (count == 12) throw DataError(fmt::format("pose file line {}: more than 12 values", line_no));
      double v = 0.0;
      const auto [end, ec] = std::from_chars(line.data() + pos, line.data() + line.size(), v);
      if (ec != std::errc() || !std::isfinite(v)) {
        throw DataError(fmt::format("pose file line {}: invalid number", line_no));
      }
      m[count++] = v;
      pos = static_cast<std::size_t>(end - line.data());
    }
    if (count == 0) continue;
    if (count != 12) throw DataError(fmt::format("pose file line {}: expected 12 values, got {}", line_no, count));
    try {
      poses.push_back(RigidTransform::from_row_major(m));
    } catch (const InvalidArgument& e) {
      throw DataError(fmt::format("pose file line {}: {}", line_no, e.what()));
    }
  }
  return poses;
}

void write_poses(const std::filesystem::path& path, std::span<const RigidTransform> poses) {
  detail::write_file(path, encode_poses(poses));
}

std::vector<RigidTransform> read_poses(const std::filesystem::path& path) {
  return decode_poses(detail::read_file(path));
}

std::string read_text_file(const std::filesystem::path& path) { return detail::read_file(path); }

void write_text_file(const std::filesystem::path& path, std::string_view text) { detail::write_file(path, text); }

}  // namespace heightlab
