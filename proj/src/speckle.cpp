#include "lakewatch/speckle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "lakewatch/error.hpp"

namespace lakewatch {

namespace {

void check_window(const RasterGrid& grid, std::size_t window) {
  if (window < 1 || window % 2 == 0) throw DataError("window must be odd and positive");
  if (window > std::min(grid.width(), grid.height())) {
    throw DataError("window " + std::to_string(window) + " larger than grid " +
                    std::to_string(grid.width()) + "x" + std::to_string(grid.height()));
  }
}

// Runs body(row_begin, row_end) over contiguous row blocks.
void for_row_blocks(std::size_t rows, unsigned workers,
                    const std::function<void(std::size_t, std::size_t)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(rows)));
  if (workers == 1) {
    body(0, rows);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (rows + workers - 1) / workers;
  for (std::size_t begin = 0; begin < rows; begin += chunk) {
    pool.emplace_back(body, begin, std::min(rows, begin + chunk));
  }
}

struct WindowStat {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

WindowStat window_stat(const RasterGrid& grid, std::size_t col, std::size_t row, std::size_t half) {
  const std::size_t r0 = row >= half ? row - half : 0;
  const std::size_t r1 = std::min(grid.height() - 1, row + half);
  const std::size_t c0 = col >= half ? col - half : 0;
  const std::size_t c1 = std::min(grid.width() - 1, col + half);
  const auto data = grid.data();
  const auto valid = grid.validity();
  const std::size_t w = grid.width();

  WindowStat s;
  double sum = 0.0;
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      if (valid[r * w + c]) {
        sum += data[r * w + c];
        ++s.count;
      }
    }
  }
  if (s.count == 0) return s;
  s.mean = sum / static_cast<double>(s.count);
  double ss = 0.0;
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      if (valid[r * w + c]) {
        const double d = data[r * w + c] - s.mean;
        ss += d * d;
      }
    }
  }
  s.stddev = std::sqrt(ss / static_cast<double>(s.count));
  return s;
}

}  // namespace

void LeeParams::validate() const {
  if (window < 3 || window % 2 == 0) throw UsageError("Lee window must be odd and >= 3");
  if (!(looks > 0.0)) throw UsageError("Lee looks must be > 0");
  if (!(damping >= 0.0)) throw UsageError("Lee damping must be >= 0");
}

double LeeParams::cu() const { return 1.0 / std::sqrt(looks); }

double LeeParams::cmax() const { return std::sqrt(1.0 + 2.0 / looks); }

LocalStats local_stats(const RasterGrid& grid, std::size_t window, unsigned workers) {
  check_window(grid, window);
  LocalStats out;
  out.width = grid.width();
  out.height = grid.height();
  out.mean.assign(grid.size(), 0.0);
  out.stddev.assign(grid.size(), 0.0);
  out.valid.assign(grid.size(), 0);
  const std::size_t half = window / 2;
  for_row_blocks(grid.height(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      for (std::size_t c = 0; c < grid.width(); ++c) {
        const WindowStat s = window_stat(grid, c, r, half);
        const std::size_t i = r * grid.width() + c;
        out.mean[i] = s.mean;
        out.stddev[i] = s.stddev;
        out.valid[i] = s.count > 0 ? 1 : 0;
      }
    }
  });
  return out;
}

double enhanced_lee_weight(double ci, const LeeParams& params) {
  const double cu = params.cu();
  return std::exp(-params.damping * (ci - cu) / (params.cmax() - ci));
}

double enhanced_lee_value(double center, double mean, double stddev, const LeeParams& params) {
  if (mean <= 0.0) return mean;
  const double ci = stddev / mean;
  if (ci <= params.cu()) return mean;
  if (ci >= params.cmax()) return center;
  return mean + enhanced_lee_weight(ci, params) * (center - mean);
}

RasterGrid enhanced_lee(const RasterGrid& grid, const LeeParams& params, unsigned workers) {
  params.validate();
  if (grid.scale() != Scale::LinearPower) {
    throw DataError(std::string("Enhanced Lee needs linear power input, got ") +
                    to_string(grid.scale()));
  }
  check_window(grid, params.window);

  const auto src = grid.data();
  const auto valid = grid.validity();
  std::vector<float> out(src.begin(), src.end());
  const std::size_t half = params.window / 2;
  for_row_blocks(grid.height(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      for (std::size_t c = 0; c < grid.width(); ++c) {
        const std::size_t i = r * grid.width() + c;
        if (!valid[i]) continue;
        const WindowStat s = window_stat(grid, c, r, half);
        out[i] = static_cast<float>(enhanced_lee_value(src[i], s.mean, s.stddev, params));
      }
    }
  });
  return RasterGrid(grid.width(), grid.height(), grid.geo(), std::move(out),
                    std::vector<std::uint8_t>(valid.begin(), valid.end()), grid.nodata(),
                    grid.scale());
}

}  // namespace lakewatch
