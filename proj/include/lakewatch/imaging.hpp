#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lakewatch/raster.hpp"
#include "lakewatch/segmentation.hpp"
#include "lakewatch/timeseries.hpp"

namespace lakewatch {

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // RGB, row-major

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h * 3, fill) {}

  void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t i = (y * width + x) * 3;
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
};

/// 8-bit RGB PNG, default compression; deterministic for identical input.
std::string encode_png(const RgbImage& image);
/// Decodes any PNG to 8-bit RGB. Throws DataError.
RgbImage decode_png(const std::string& bytes);

/// Grayscale normalized SAR with the 1-pixel mask contour drawn in magenta.
/// Only the top-left `width` x `height` block is rendered (the unpadded crop).
RgbImage render_overlay(const RasterGrid& normalized, const BinaryMask& mask, std::size_t width,
                        std::size_t height);

/// Scatter of the series, summer maxima highlighted, optional trend line.
RgbImage render_series_plot(const AreaSeries& series, const AreaSeries& maxima,
                            const std::optional<TrendReport>& trend, std::size_t width = 800,
                            std::size_t height = 400);

}  // namespace lakewatch
