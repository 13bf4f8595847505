#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lakewatch/raster.hpp"
#include "lakewatch/segmentation.hpp"

namespace lakewatch::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lakewatch-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline GeoReference test_geo(double pixel = 20.0, double ox = 500000.0, double oy = 3100000.0,
                             std::string crs = "EPSG:32645") {
  return GeoReference{ox, oy, pixel, std::move(crs)};
}

inline RasterGrid make_grid(std::size_t w, std::size_t h, std::vector<float> data,
                            Scale scale = Scale::LinearPower, double pixel = 20.0) {
  return RasterGrid(w, h, test_geo(pixel), std::move(data), std::nullopt, scale);
}

inline RasterGrid constant_grid(std::size_t w, std::size_t h, float v, Scale scale = Scale::LinearPower) {
  return make_grid(w, h, std::vector<float>(w * h, v), scale);
}

inline std::vector<float> uniform_values(std::mt19937_64& rng, std::size_t n, float lo, float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline std::vector<std::uint8_t> random_validity(std::mt19937_64& rng, std::size_t n, double p_valid) {
  std::bernoulli_distribution dist(p_valid);
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = dist(rng) ? 1 : 0;
  return v;
}

inline ProbabilityMap random_probabilities(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo = 0.02,
                                           double hi = 0.98) {
  std::uniform_real_distribution<double> dist(lo, hi);
  ProbabilityMap pm;
  pm.width = w;
  pm.height = h;
  pm.probs.resize(w * h);
  for (auto& p : pm.probs) p = dist(rng);
  pm.validity.assign(w * h, 1);
  return pm;
}

inline BinaryMask random_mask(std::mt19937_64& rng, std::size_t w, std::size_t h, double p_water = 0.3) {
  std::bernoulli_distribution dist(p_water);
  BinaryMask m;
  m.width = w;
  m.height = h;
  m.classes.resize(w * h);
  for (auto& c : m.classes) c = dist(rng) ? 1 : 0;
  m.validity.assign(w * h, 1);
  return m;
}

inline BinaryMask empty_mask(std::size_t w, std::size_t h) {
  BinaryMask m;
  m.width = w;
  m.height = h;
  m.classes.assign(w * h, 0);
  m.validity.assign(w * h, 1);
  return m;
}

}  // namespace lakewatch::testing
