#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lakewatch/segmentation.hpp"

namespace lakewatch {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  /// Names of metrics whose denominator was zero; those report 0.
  std::vector<std::string> degenerate;

  bool is_degenerate(const std::string& name) const;
};

/// Counts over jointly-valid pixels. Throws DataError on shape mismatch.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth);

/// Accuracy, precision, recall, F1 (harmonic mean) and IoU = TP/(TP+FP+FN)
/// from aggregate counts. Throws DataError for all-zero counts.
MetricsReport metrics(const ConfusionCounts& cc);

}  // namespace lakewatch
