#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lakewatch/error.hpp"
#include "lakewatch/raster.hpp"

namespace lakewatch {

/// Per-pixel water probability. Invalid pixels carry p = 0.
struct ProbabilityMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> probs;
  std::vector<std::uint8_t> validity;
  bool low_confidence = false;  // backend could not separate classes
};

/// Per-pixel class, 0 background / 1 water. Invalid pixels are class 0.
struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> classes;
  std::vector<std::uint8_t> validity;

  std::size_t water_count() const;
  bool operator==(const BinaryMask&) const = default;
};

/// 8-bit rendering a backend expects when handed a raw intensity raster.
enum class InputScaling { Equalized, LogStretched };

/// Contract every water segmenter satisfies: output shape equals input
/// shape; invalid input pixels come back with p = 0 and invalid.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual std::string identifier() const = 0;
  virtual ProbabilityMap segment(const RasterGrid& grid) const = 0;
  virtual InputScaling input_scaling() const { return InputScaling::Equalized; }
};

/// The backend's preferred 8-bit view of `grid`; UInt8 input passes through.
RasterGrid segmentation_input(const SegmenterBackend& backend, const RasterGrid& grid);

/// Raised when a learned-model backend cannot be loaded or run.
class BackendUnavailable : public DataError {
 public:
  explicit BackendUnavailable(const std::string& what)
      : DataError("backend unavailable: " + what) {}
};

struct OtsuResult {
  double threshold = 0.0;  // pixels at or below belong to the dark class
  bool degenerate = false;
};

/// Otsu threshold over the 256 integer levels of valid pixels. When several
/// cuts maximise the between-class variance the midpoint of the plateau is
/// used. Throws DataError if no pixel is valid.
OtsuResult otsu_threshold(const RasterGrid& grid);

inline constexpr double kDefaultSoftness = 8.0;

/// Classical backend for 8-bit normalized SAR: open water is dark, so
/// p = sigmoid((t - intensity) / softness) with t the Otsu threshold.
/// A constant image yields p = 0.5 everywhere and low_confidence.
ProbabilityMap threshold_segment(const RasterGrid& grid, double softness = kDefaultSoftness);

class ThresholdBackend final : public SegmenterBackend {
 public:
  explicit ThresholdBackend(double softness = kDefaultSoftness) : softness_(softness) {}
  std::string identifier() const override { return "otsu-threshold"; }
  ProbabilityMap segment(const RasterGrid& grid) const override {
    return threshold_segment(grid, softness_);
  }
  /// Equalization flattens the histogram, which leaves Otsu a median split.
  InputScaling input_scaling() const override { return InputScaling::LogStretched; }

 private:
  double softness_;
};

/// Water iff valid and p >= threshold. threshold must lie in (0, 1).
BinaryMask binarize(const ProbabilityMap& pm, double threshold = 0.5);

/// Keeps the largest 4- or 8-connected water component. Ties go to the
/// component containing the smallest row-major pixel index.
BinaryMask largest_component(const BinaryMask& mask, int connectivity = 8);

/// Float32-ready raster of probabilities (invalid pixels -> nodata -1).
RasterGrid probability_raster(const ProbabilityMap& pm, const GeoReference& geo);
/// 8-bit raster of classes {0,1}; invalid pixels -> nodata 255.
RasterGrid mask_raster(const BinaryMask& mask, const GeoReference& geo);
/// Reads a mask back: value >= 0.5 is water, validity from the raster.
BinaryMask mask_from_raster(const RasterGrid& grid);
ProbabilityMap probability_from_raster(const RasterGrid& grid);

inline constexpr float kMaskNodata = 255.0f;
inline constexpr float kProbabilityNodata = -1.0f;

}  // namespace lakewatch
