#pragma once

#include <cstddef>
#include <vector>

#include "lakewatch/segmentation.hpp"

namespace lakewatch {

inline constexpr double kProbClamp = 1e-7;  // BCE/focal log guard
inline constexpr double kDiceSmooth = 1.0;  // added to Dice numerator and denominator

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
  void validate() const;
};

struct LossWeights {
  double bce = 1.0;
  double dice = 1.0;
  double focal = 1.0;
};

/// Scalar loss plus dL/dp for every pixel (zero outside jointly-valid pixels).
struct LossResult {
  double value = 0.0;
  std::vector<double> gradient;
  std::size_t n_valid = 0;
};

/// Neumaier-compensated running sum; fixed accumulation order keeps results
/// independent of how the caller partitions work.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Mean binary cross-entropy over jointly-valid pixels, p clamped to [eps, 1-eps].
/// Throws DataError on shape mismatch or when no pixel is jointly valid.
LossResult bce_loss(const ProbabilityMap& pred, const BinaryMask& truth);

/// -1/N sum[a (1-p)^g y log p + (1-a) p^g (1-y) log(1-p)], same clamp as BCE.
LossResult focal_loss(const ProbabilityMap& pred, const BinaryMask& truth, const FocalParams& params = {});

/// 1 - (2 sum p*y + s) / (sum p + sum y + s) with s = kDiceSmooth; p is not clamped.
LossResult dice_loss(const ProbabilityMap& pred, const BinaryMask& truth);

/// Weighted sum of the three losses (unit weights by default); the gradient
/// is the same weighted sum of component gradients.
LossResult total_loss(const ProbabilityMap& pred, const BinaryMask& truth, const FocalParams& params = {},
                      const LossWeights& weights = {});

}  // namespace lakewatch
