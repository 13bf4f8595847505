#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lakewatch/raster.hpp"

namespace lakewatch {

/// Enhanced Lee configuration. Defaults: 7x7 window, damping 1, single look.
struct LeeParams {
  std::size_t window = 7;
  double damping = 1.0;
  double looks = 1.0;

  /// Throws UsageError unless window is odd and >= 3, looks > 0, damping >= 0.
  void validate() const;

  /// Speckle coefficient of variation for fully developed speckle, 1/sqrt(L).
  double cu() const;
  /// Upper bound of the heterogeneous band, sqrt(1 + 2/L).
  double cmax() const;
};

/// Per-pixel statistics over the valid in-bounds neighbours of a window.
struct LocalStats {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> mean;
  std::vector<double> stddev;  // population convention
  std::vector<std::uint8_t> valid;  // 0 where the window held no valid pixel
};

/// Window shrinks at the borders. Throws DataError when the window is even,
/// < 1, or larger than the grid.
LocalStats local_stats(const RasterGrid& grid, std::size_t window, unsigned workers = 1);

/// Weight applied to (centre - mean) on the heterogeneous band.
double enhanced_lee_weight(double ci, const LeeParams& params);

/// Enhanced Lee filtered value for one pixel given its window statistics.
double enhanced_lee_value(double center, double mean, double stddev, const LeeParams& params);

/// Enhanced Lee speckle filter. Invalid pixels pass through unchanged and are
/// excluded from neighbourhood statistics; the validity mask is preserved.
/// Rows are split across `workers` threads; the result does not depend on it.
///
/// Throws DataError for non-linear (dB / 8-bit) input or a window larger
/// than the grid.
RasterGrid enhanced_lee(const RasterGrid& grid, const LeeParams& params = {}, unsigned workers = 1);

}  // namespace lakewatch
