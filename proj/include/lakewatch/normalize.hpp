#pragma once

#include <array>
#include <cstdint>

#include "lakewatch/raster.hpp"

namespace lakewatch {

/// 8-bit sentinel for invalid pixels in normalized output.
inline constexpr std::uint8_t kNodata8 = 0;
/// Smallest level a valid pixel may take, so it never collides with kNodata8.
inline constexpr std::uint8_t kLutFloor = 1;

/// Histogram-equalization lookup over 256 equal-width bins.
struct EqualizationMap {
  std::array<double, 257> bin_edges{};
  std::array<std::uint8_t, 256> lut{};
  bool degenerate = false;  // constant input: every value maps to 255

  double bin_width() const { return (bin_edges[256] - bin_edges[0]) / 256.0; }
  /// Continuous output level for one intensity (before rounding).
  double map(double intensity) const;
};

/// Builds the equalization over valid pixels:
///   lut[k] = round(255 * (cdf[k] - cdf_min) / (1 - cdf_min)), floored at kLutFloor,
/// with cdf_min the smallest non-zero CDF value. Ties round half away from zero.
/// Throws DataError("empty raster") when no pixel is valid.
EqualizationMap build_equalization(const RasterGrid& grid);

/// Maps valid pixels by linear interpolation between lut entries at bin
/// centres (clamped at both ends) and rounds to 8 bits. Invalid pixels
/// become kNodata8. Output scale is Scale::UInt8 with nodata = kNodata8.
RasterGrid apply_equalization(const RasterGrid& grid, const EqualizationMap& map);

/// build + apply
RasterGrid equalize(const RasterGrid& grid);

/// Linear 8-bit stretch of dB intensities over the valid [min, max] onto
/// [kLutFloor, 255]. Linear power is converted first, with non-positive
/// values clamped to the smallest positive valid value. A constant raster
/// maps to 255; UInt8 input is returned unchanged.
RasterGrid log_stretch(const RasterGrid& grid);

}  // namespace lakewatch
