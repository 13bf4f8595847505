#include "lakewatch/metrics.hpp"

#include <algorithm>

#include "lakewatch/error.hpp"

namespace lakewatch {

bool MetricsReport::is_degenerate(const std::string& name) const {
  return std::find(degenerate.begin(), degenerate.end(), name) != degenerate.end();
}

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.width != truth.width || pred.height != truth.height ||
      pred.classes.size() != truth.classes.size()) {
    throw DataError("shape mismatch between prediction and truth");
  }
  ConfusionCounts cc;
  for (std::size_t i = 0; i < pred.classes.size(); ++i) {
    if (!(pred.validity[i] && truth.validity[i])) continue;
    const bool p = pred.classes[i] != 0, t = truth.classes[i] != 0;
    if (p && t) ++cc.tp;
    else if (!p && !t) ++cc.tn;
    else if (p) ++cc.fp;
    else ++cc.fn;
  }
  return cc;
}

MetricsReport metrics(const ConfusionCounts& cc) {
  if (cc.total() == 0) throw DataError("empty confusion counts");
  MetricsReport m;
  auto ratio = [&m](std::uint64_t num, std::uint64_t den, const char* name) {
    if (den == 0) {
      m.degenerate.emplace_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(cc.tp + cc.tn, cc.total(), "accuracy");
  m.precision = ratio(cc.tp, cc.tp + cc.fp, "precision");
  m.recall = ratio(cc.tp, cc.tp + cc.fn, "recall");
  if (m.precision + m.recall == 0.0) {
    m.degenerate.emplace_back("f1");
    m.f1 = 0.0;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  m.iou = ratio(cc.tp, cc.tp + cc.fp + cc.fn, "iou");
  return m;
}

}  // namespace lakewatch
