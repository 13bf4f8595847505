#pragma once

#include <atomic>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lakewatch/segmentation.hpp"

namespace lakewatch {

/// A learned segmenter exported as a sequential single-channel operator
/// graph in JSON (`"format": "lakewatch-graph"`, version 1).
///
/// Supported nodes:
///   {"op": "conv2d", "kernel": [[...], ...], "bias": b}   odd square kernel, zero padding
///   {"op": "affine", "scale": s, "bias": b}
///   {"op": "relu"} | {"op": "sigmoid"}
///   {"op": "clamp", "min": lo, "max": hi}
///   {"op": "constant", "value": v}
/// The input tile is multiplied by `input_scale` before the first node.
/// Output values must lie in [0, 1].
class GraphModel {
 public:
  struct Node {
    enum class Op { Conv2d, Affine, Relu, Sigmoid, Clamp, Constant } op;
    std::vector<double> kernel;  // row-major, kernel_size^2 entries
    std::size_t kernel_size = 0;
    double a = 0.0;  // scale / min / value
    double b = 0.0;  // bias / max
  };

  /// Throws BackendUnavailable if the file is missing or malformed.
  static GraphModel load(const std::filesystem::path& path);
  static GraphModel parse(const std::string& json_text);

  std::size_t tile_size() const { return tile_size_; }

  /// Runs one tile (tile_size^2 values, row-major).
  std::vector<double> infer_tile(std::span<const float> tile) const;

 private:
  std::size_t tile_size_ = 256;
  double input_scale_ = 1.0;
  std::vector<Node> nodes_;
};

/// Tiles the (lattice-padded) grid, infers each tile independently and
/// stitches the results in place without overlap blending.
class GraphModelBackend final : public SegmenterBackend {
 public:
  explicit GraphModelBackend(const std::filesystem::path& model_path, unsigned workers = 1);

  std::string identifier() const override { return "graph-model:" + name_; }
  ProbabilityMap segment(const RasterGrid& grid) const override;

  std::size_t tiles_inferred() const { return tiles_inferred_.load(); }

 private:
  GraphModel model_;
  std::string name_;
  unsigned workers_;
  mutable std::atomic<std::size_t> tiles_inferred_{0};
};

/// Loads the model at `model_path` and segments `grid` with it.
ProbabilityMap run_model_backend(const RasterGrid& grid, const std::filesystem::path& model_path);

}  // namespace lakewatch
