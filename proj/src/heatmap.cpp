#include "radkit/heatmap.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "radkit/error.hpp"

namespace radkit {

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void no_flush(png_structp) {}

}  // namespace

std::string render_png(const Map2D& map, bool log_scale) {
  if (map.rows == 0 || map.cols == 0) throw Error(ErrorCode::shape_mismatch, "cannot render an empty map");
  std::vector<double> v(map.data.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = log_scale ? 10.0 * std::log10(std::max(map.data[i], 0.0) + 1e-12) : map.data[i];
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;

  std::vector<png_byte> pixels(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    pixels[i] = span > 0 ? static_cast<png_byte>(std::lround(255.0 * (v[i] - lo) / span)) : 0;

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::io_failure, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::io_failure, "png_create_info_struct failed");
  }
  std::string out;
  std::vector<png_bytep> rows(map.rows);
  for (std::size_t r = 0; r < map.rows; ++r) rows[r] = pixels.data() + r * map.cols;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::io_failure, "png encoding failed");
  }
  png_set_write_fn(png, &out, append_bytes, no_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(map.cols), static_cast<png_uint_32>(map.rows), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace radkit
