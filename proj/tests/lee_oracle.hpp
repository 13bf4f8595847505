#pragma once

// Brute-force Enhanced Lee reference: gathers each pixel's valid in-bounds
// neighbours into a list and applies the three-regime rule directly.

#include <cmath>
#include <vector>

#include "lakewatch/raster.hpp"

namespace lakewatch::testing {

struct OracleStat {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

inline OracleStat oracle_window(const RasterGrid& g, long col, long row, long half) {
  std::vector<double> vals;
  for (long r = row - half; r <= row + half; ++r) {
    for (long c = col - half; c <= col + half; ++c) {
      if (r < 0 || c < 0 || r >= static_cast<long>(g.height()) || c >= static_cast<long>(g.width())) continue;
      if (!g.valid(static_cast<std::size_t>(c), static_cast<std::size_t>(r))) continue;
      vals.push_back(g.at(static_cast<std::size_t>(c), static_cast<std::size_t>(r)));
    }
  }
  OracleStat s;
  s.count = vals.size();
  if (vals.empty()) return s;
  double sum = 0.0;
  for (double v : vals) sum += v;
  s.mean = sum / static_cast<double>(vals.size());
  double ss = 0.0;
  for (double v : vals) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(vals.size()));
  return s;
}

inline std::vector<float> oracle_enhanced_lee(const RasterGrid& g, long window, double damping, double looks) {
  const double cu = 1.0 / std::sqrt(looks);
  const double cmax = std::sqrt(1.0 + 2.0 / looks);
  std::vector<float> out(g.data().begin(), g.data().end());
  for (long r = 0; r < static_cast<long>(g.height()); ++r) {
    for (long c = 0; c < static_cast<long>(g.width()); ++c) {
      const auto uc = static_cast<std::size_t>(c), ur = static_cast<std::size_t>(r);
      if (!g.valid(uc, ur)) continue;
      const OracleStat s = oracle_window(g, c, r, window / 2);
      const double center = g.at(uc, ur);
      double v;
      if (s.mean <= 0.0) {
        v = s.mean;
      } else {
        const double ci = s.stddev / s.mean;
        if (ci <= cu) v = s.mean;
        else if (ci >= cmax) v = center;
        else v = s.mean + std::exp(-damping * (ci - cu) / (cmax - ci)) * (center - s.mean);
      }
      out[ur * g.width() + uc] = static_cast<float>(v);
    }
  }
  return out;
}

}  // namespace lakewatch::testing
