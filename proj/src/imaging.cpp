#include "lakewatch/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "lakewatch/error.hpp"

namespace lakewatch {

namespace {

void png_write_to_string(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void png_flush_noop(png_structp) {}

struct ReadCursor {
  const std::string* bytes;
  std::size_t pos;
};

void png_read_from_string(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->pos, len);
  cur->pos += len;
}

void draw_line(RgbImage& img, long x0, long y0, long x1, long y1, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
  const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    if (x0 >= 0 && y0 >= 0 && x0 < static_cast<long>(img.width) && y0 < static_cast<long>(img.height)) {
      img.set(static_cast<std::size_t>(x0), static_cast<std::size_t>(y0), r, g, b);
    }
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_dot(RgbImage& img, long cx, long cy, long radius, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (long y = cy - radius; y <= cy + radius; ++y) {
    for (long x = cx - radius; x <= cx + radius; ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > radius * radius) continue;
      if (x >= 0 && y >= 0 && x < static_cast<long>(img.width) && y < static_cast<long>(img.height)) {
        img.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), r, g, b);
      }
    }
  }
}

}  // namespace

std::string encode_png(const RgbImage& image) {
  if (image.width == 0 || image.height == 0) throw DataError("cannot encode an empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw DataError("PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * image.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

RgbImage decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw DataError("not a PNG");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png_create_read_struct failed");
  }
  RgbImage img;
  ReadCursor cursor{&bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG decoding failed");
  }
  png_set_read_fn(png, &cursor, png_read_from_string);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.pixels.resize(img.width * img.height * 3);
  for (std::size_t y = 0; y < img.height; ++y) png_read_row(png, img.pixels.data() + y * img.width * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

RgbImage render_overlay(const RasterGrid& normalized, const BinaryMask& mask, std::size_t width,
                        std::size_t height) {
  if (mask.width != normalized.width() || mask.height != normalized.height()) {
    throw DataError("overlay mask shape differs from raster");
  }
  width = std::min(width, normalized.width());
  height = std::min(height, normalized.height());
  RgbImage img(width, height);
  auto water = [&](long x, long y) {
    if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) return false;
    const std::size_t i = static_cast<std::size_t>(y) * mask.width + static_cast<std::size_t>(x);
    return mask.classes[i] != 0 && mask.validity[i] != 0;
  };
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const auto v = static_cast<std::uint8_t>(std::clamp(std::lround(normalized.at(x, y)), 0L, 255L));
      const auto xi = static_cast<long>(x), yi = static_cast<long>(y);
      const bool contour = water(xi, yi) && !(water(xi - 1, yi) && water(xi + 1, yi) &&
                                              water(xi, yi - 1) && water(xi, yi + 1));
      if (contour) img.set(x, y, 255, 0, 255);
      else img.set(x, y, v, v, v);
    }
  }
  return img;
}

RgbImage render_series_plot(const AreaSeries& series, const AreaSeries& maxima,
                            const std::optional<TrendReport>& trend, std::size_t width, std::size_t height) {
  RgbImage img(width, height, 255);
  if (series.empty()) return img;
  const long margin = 40;
  const auto& obs = series.observations();
  double t0 = fractional_year(obs.front().acquired_at), t1 = fractional_year(obs.back().acquired_at);
  double a0 = obs.front().area_m2, a1 = a0;
  for (const auto& o : obs) {
    a0 = std::min(a0, o.area_m2);
    a1 = std::max(a1, o.area_m2);
  }
  if (t1 == t0) t1 = t0 + 1.0;
  if (a1 == a0) a1 = a0 + 1.0;
  const double pad = 0.05 * (a1 - a0);
  a0 -= pad;
  a1 += pad;
  const double plot_w = static_cast<double>(width) - 2.0 * margin;
  const double plot_h = static_cast<double>(height) - 2.0 * margin;
  auto px = [&](double t) { return static_cast<long>(std::lround(margin + (t - t0) / (t1 - t0) * plot_w)); };
  auto py = [&](double a) {
    return static_cast<long>(std::lround(static_cast<double>(height) - margin - (a - a0) / (a1 - a0) * plot_h));
  };

  const long right = static_cast<long>(width) - margin, bottom = static_cast<long>(height) - margin;
  draw_line(img, margin, bottom, right, bottom, 0, 0, 0);
  draw_line(img, margin, margin, margin, bottom, 0, 0, 0);
  for (int y = static_cast<int>(std::ceil(t0)); y <= static_cast<int>(std::floor(t1)); ++y) {
    draw_line(img, px(y), bottom, px(y), bottom + 5, 0, 0, 0);
  }

  long prev_x = -1, prev_y = -1;
  for (const auto& o : obs) {
    const long x = px(fractional_year(o.acquired_at)), y = py(o.area_m2);
    if (prev_x >= 0) draw_line(img, prev_x, prev_y, x, y, 170, 170, 200);
    draw_dot(img, x, y, 2, 60, 60, 160);
    prev_x = x;
    prev_y = y;
  }
  for (const auto& o : maxima.observations()) {
    draw_dot(img, px(fractional_year(o.acquired_at)), py(o.area_m2), 4, 220, 40, 40);
  }
  if (trend) {
    const double e0 = trend->epoch_year;
    draw_line(img, px(t0), py(trend->intercept_m2 + trend->slope_m2_per_year * (t0 - e0)), px(t1),
              py(trend->intercept_m2 + trend->slope_m2_per_year * (t1 - e0)), 20, 150, 20);
  }
  return img;
}

}  // namespace lakewatch
