#include "lakewatch/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "lakewatch/normalize.hpp"

namespace lakewatch {

std::size_t BinaryMask::water_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < classes.size(); ++i) n += (classes[i] && validity[i]) ? 1 : 0;
  return n;
}

RasterGrid segmentation_input(const SegmenterBackend& backend, const RasterGrid& grid) {
  if (grid.scale() == Scale::UInt8) return grid;
  return backend.input_scaling() == InputScaling::LogStretched ? log_stretch(grid) : equalize(grid);
}

OtsuResult otsu_threshold(const RasterGrid& grid) {
  std::array<double, 256> hist{};
  double total = 0.0;
  const auto data = grid.data();
  const auto valid = grid.validity();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!valid[i]) continue;
    const long level = std::clamp<long>(std::lround(data[i]), 0, 255);
    hist[static_cast<std::size_t>(level)] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) throw DataError("cannot segment: no valid pixels");

  double sum_all = 0.0;
  for (std::size_t k = 0; k < 256; ++k) sum_all += static_cast<double>(k) * hist[k];

  std::array<double, 256> between{};
  double w0 = 0.0, sum0 = 0.0, best = 0.0;
  for (std::size_t k = 0; k < 256; ++k) {
    w0 += hist[k];
    sum0 += static_cast<double>(k) * hist[k];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    between[k] = w0 * w1 * (m0 - m1) * (m0 - m1);
    best = std::max(best, between[k]);
  }
  if (best == 0.0) return {sum_all / total, true};

  double k_sum = 0.0, k_count = 0.0;
  for (std::size_t k = 0; k < 256; ++k) {
    if (between[k] >= best * (1.0 - 1e-12)) {
      k_sum += static_cast<double>(k);
      k_count += 1.0;
    }
  }
  // Cut sits between level k and k+1.
  return {k_sum / k_count + 0.5, false};
}

ProbabilityMap threshold_segment(const RasterGrid& grid, double softness) {
  if (!(softness > 0.0)) throw UsageError("softness must be > 0");
  const OtsuResult otsu = otsu_threshold(grid);
  ProbabilityMap pm;
  pm.width = grid.width();
  pm.height = grid.height();
  pm.probs.assign(grid.size(), 0.0);
  pm.validity.assign(grid.validity().begin(), grid.validity().end());
  pm.low_confidence = otsu.degenerate;
  const auto data = grid.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!pm.validity[i]) continue;
    pm.probs[i] = otsu.degenerate ? 0.5 : 1.0 / (1.0 + std::exp(-(otsu.threshold - data[i]) / softness));
  }
  return pm;
}

BinaryMask binarize(const ProbabilityMap& pm, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("binarize threshold must lie in (0, 1)");
  BinaryMask mask;
  mask.width = pm.width;
  mask.height = pm.height;
  mask.validity = pm.validity;
  mask.classes.assign(pm.probs.size(), 0);
  for (std::size_t i = 0; i < pm.probs.size(); ++i) {
    mask.classes[i] = (pm.validity[i] && pm.probs[i] >= threshold) ? 1 : 0;
  }
  return mask;
}

BinaryMask largest_component(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) throw UsageError("connectivity must be 4 or 8");
  const std::size_t w = mask.width, h = mask.height, n = mask.classes.size();
  std::vector<std::int32_t> label(n, -1);
  std::vector<std::size_t> stack;
  std::size_t best_size = 0;
  std::int32_t best_label = -1, next_label = 0;

  auto is_water = [&](std::size_t i) { return mask.classes[i] && mask.validity[i]; };

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!is_water(seed) || label[seed] >= 0) continue;
    const std::int32_t id = next_label++;
    std::size_t size = 0;
    label[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++size;
      const auto r = static_cast<long>(i / w), c = static_cast<long>(i % w);
      for (long dr = -1; dr <= 1; ++dr) {
        for (long dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (connectivity == 4 && dr != 0 && dc != 0) continue;
          const long rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
          const std::size_t j = static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc);
          if (is_water(j) && label[j] < 0) {
            label[j] = id;
            stack.push_back(j);
          }
        }
      }
    }
    // Seeds are visited in row-major order, so strict '>' keeps the earliest on ties.
    if (size > best_size) {
      best_size = size;
      best_label = id;
    }
  }

  BinaryMask out = mask;
  for (std::size_t i = 0; i < n; ++i) out.classes[i] = (best_label >= 0 && label[i] == best_label) ? 1 : 0;
  return out;
}

RasterGrid probability_raster(const ProbabilityMap& pm, const GeoReference& geo) {
  std::vector<float> data(pm.probs.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = pm.validity[i] ? static_cast<float>(pm.probs[i]) : kProbabilityNodata;
  }
  return RasterGrid(pm.width, pm.height, geo, std::move(data), pm.validity, kProbabilityNodata,
                    Scale::LinearPower);
}

RasterGrid mask_raster(const BinaryMask& mask, const GeoReference& geo) {
  std::vector<float> data(mask.classes.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = mask.validity[i] ? static_cast<float>(mask.classes[i]) : kMaskNodata;
  }
  return RasterGrid(mask.width, mask.height, geo, std::move(data), mask.validity, kMaskNodata,
                    Scale::UInt8);
}

BinaryMask mask_from_raster(const RasterGrid& grid) {
  BinaryMask mask;
  mask.width = grid.width();
  mask.height = grid.height();
  mask.validity.assign(grid.validity().begin(), grid.validity().end());
  mask.classes.assign(grid.size(), 0);
  const auto data = grid.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    mask.classes[i] = (mask.validity[i] && data[i] >= 0.5f) ? 1 : 0;
  }
  return mask;
}

ProbabilityMap probability_from_raster(const RasterGrid& grid) {
  ProbabilityMap pm;
  pm.width = grid.width();
  pm.height = grid.height();
  pm.validity.assign(grid.validity().begin(), grid.validity().end());
  pm.probs.assign(grid.size(), 0.0);
  const auto data = grid.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!pm.validity[i]) continue;
    if (!(data[i] >= 0.0f && data[i] <= 1.0f)) {
      throw DataError("probability raster holds a value outside [0, 1]");
    }
    pm.probs[i] = data[i];
  }
  return pm;
}

}  // namespace lakewatch
