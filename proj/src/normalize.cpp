#include "lakewatch/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lakewatch/error.hpp"

namespace lakewatch {

double EqualizationMap::map(double intensity) const {
  if (degenerate) return 255.0;
  const double pos = (intensity - bin_edges[0]) / bin_width() - 0.5;
  if (!(pos > 0.0)) return lut[0];
  if (pos >= 255.0) return lut[255];
  const auto k = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(k);
  return lut[k] + f * (static_cast<double>(lut[k + 1]) - lut[k]);
}

EqualizationMap build_equalization(const RasterGrid& grid) {
  const auto data = grid.data();
  const auto valid = grid.validity();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!valid[i]) continue;
    lo = std::min(lo, static_cast<double>(data[i]));
    hi = std::max(hi, static_cast<double>(data[i]));
    ++n;
  }
  if (n == 0) throw DataError("empty raster: no valid pixels to equalize");

  EqualizationMap map;
  if (lo == hi) {
    map.bin_edges.fill(lo);
    map.lut.fill(255);
    map.degenerate = true;
    return map;
  }
  const double span = hi - lo;
  for (std::size_t k = 0; k < 256; ++k) map.bin_edges[k] = lo + span * static_cast<double>(k) / 256.0;
  map.bin_edges[256] = hi;

  std::array<std::size_t, 256> hist{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!valid[i]) continue;
    const double pos = (data[i] - lo) * 256.0 / span;
    const auto k = std::min<std::size_t>(255, static_cast<std::size_t>(std::max(0.0, pos)));
    ++hist[k];
  }

  std::array<double, 256> cdf{};
  std::size_t cum = 0;
  for (std::size_t k = 0; k < 256; ++k) {
    cum += hist[k];
    cdf[k] = static_cast<double>(cum) / static_cast<double>(n);
  }
  const double cdf_min = *std::find_if(cdf.begin(), cdf.end(), [](double c) { return c > 0.0; });
  for (std::size_t k = 0; k < 256; ++k) {
    const double level = 255.0 * (cdf[k] - cdf_min) / (1.0 - cdf_min);
    map.lut[k] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(level), kLutFloor, 255));
  }
  return map;
}

RasterGrid apply_equalization(const RasterGrid& grid, const EqualizationMap& map) {
  const auto data = grid.data();
  const auto valid = grid.validity();
  std::vector<float> out(data.size(), static_cast<float>(kNodata8));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!valid[i]) continue;
    const long level = std::lround(map.map(data[i]));
    out[i] = static_cast<float>(std::clamp<long>(level, kLutFloor, 255));
  }
  return RasterGrid(grid.width(), grid.height(), grid.geo(), std::move(out),
                    std::vector<std::uint8_t>(valid.begin(), valid.end()),
                    static_cast<float>(kNodata8), Scale::UInt8);
}

RasterGrid equalize(const RasterGrid& grid) { return apply_equalization(grid, build_equalization(grid)); }

RasterGrid log_stretch(const RasterGrid& grid) {
  if (grid.scale() == Scale::UInt8) return grid;
  const auto data = grid.data();
  const auto valid = grid.validity();
  const bool linear = grid.scale() == Scale::LinearPower;
  double floor_power = std::numeric_limits<double>::infinity();
  if (linear) {
    for (std::size_t i = 0; i < data.size(); ++i)
      if (valid[i] && data[i] > 0.0f) floor_power = std::min(floor_power, static_cast<double>(data[i]));
  }
  std::vector<double> db(data.size(), 0.0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!valid[i]) continue;
    if (linear) {
      const double p = data[i] > 0.0f ? static_cast<double>(data[i]) : floor_power;
      db[i] = std::isfinite(p) ? 10.0 * std::log10(p) : 0.0;
    } else {
      db[i] = data[i];
    }
    lo = std::min(lo, db[i]);
    hi = std::max(hi, db[i]);
    ++n;
  }
  if (n == 0) throw DataError("empty raster: no valid pixels to stretch");

  std::vector<float> out(data.size(), static_cast<float>(kNodata8));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!valid[i]) continue;
    const double level = hi > lo ? kLutFloor + (255.0 - kLutFloor) * (db[i] - lo) / (hi - lo) : 255.0;
    out[i] = static_cast<float>(std::clamp<long>(std::lround(level), kLutFloor, 255));
  }
  return RasterGrid(grid.width(), grid.height(), grid.geo(), std::move(out),
                    std::vector<std::uint8_t>(valid.begin(), valid.end()),
                    static_cast<float>(kNodata8), Scale::UInt8);
}

}  // namespace lakewatch
