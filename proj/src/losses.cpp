#include "lakewatch/losses.hpp"

#include <algorithm>
#include <cmath>

#include "lakewatch/error.hpp"

namespace lakewatch {

namespace {

std::size_t check_pair(const ProbabilityMap& pred, const BinaryMask& truth) {
  if (pred.width != truth.width || pred.height != truth.height ||
      pred.probs.size() != truth.classes.size() || pred.validity.size() != truth.validity.size()) {
    throw DataError("shape mismatch between prediction and truth");
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.probs.size(); ++i) n += (pred.validity[i] && truth.validity[i]) ? 1 : 0;
  if (n == 0) throw DataError("no jointly valid pixels");
  return n;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

void FocalParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("focal alpha must lie in (0, 1)");
  if (!(gamma >= 0.0)) throw UsageError("focal gamma must be >= 0");
}

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) carry_ += (sum_ - t) + v;
  else carry_ += (v - t) + sum_;
  sum_ = t;
}

LossResult bce_loss(const ProbabilityMap& pred, const BinaryMask& truth) {
  const std::size_t n = check_pair(pred, truth);
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult out;
  out.n_valid = n;
  out.gradient.assign(pred.probs.size(), 0.0);
  CompensatedSum sum;
  for (std::size_t i = 0; i < pred.probs.size(); ++i) {
    if (!(pred.validity[i] && truth.validity[i])) continue;
    const double p = clamp_prob(pred.probs[i]);
    const double y = truth.classes[i];
    sum.add(-(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)));
    out.gradient[i] = (p - y) * inv_n / (p * (1.0 - p));
  }
  out.value = sum.value() * inv_n;
  return out;
}

LossResult focal_loss(const ProbabilityMap& pred, const BinaryMask& truth, const FocalParams& params) {
  params.validate();
  const std::size_t n = check_pair(pred, truth);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double a = params.alpha, g = params.gamma;
  LossResult out;
  out.n_valid = n;
  out.gradient.assign(pred.probs.size(), 0.0);
  CompensatedSum sum;
  for (std::size_t i = 0; i < pred.probs.size(); ++i) {
    if (!(pred.validity[i] && truth.validity[i])) continue;
    const double p = clamp_prob(pred.probs[i]);
    const double y = truth.classes[i];
    const double q = 1.0 - p;
    const double log_p = std::log(p), log_q = std::log(q);
    const double pos = a * std::pow(q, g) * log_p;
    const double neg = (1.0 - a) * std::pow(p, g) * log_q;
    sum.add(-(y * pos + (1.0 - y) * neg));
    const double d_pos = a * (-g * std::pow(q, g - 1.0) * log_p + std::pow(q, g) / p);
    const double d_neg = (1.0 - a) * (g * std::pow(p, g - 1.0) * log_q - std::pow(p, g) / q);
    out.gradient[i] = -(y * d_pos + (1.0 - y) * d_neg) * inv_n;
  }
  out.value = sum.value() * inv_n;
  return out;
}

LossResult dice_loss(const ProbabilityMap& pred, const BinaryMask& truth) {
  const std::size_t n = check_pair(pred, truth);
  LossResult out;
  out.n_valid = n;
  out.gradient.assign(pred.probs.size(), 0.0);
  CompensatedSum inter, sum_p, sum_y;
  for (std::size_t i = 0; i < pred.probs.size(); ++i) {
    if (!(pred.validity[i] && truth.validity[i])) continue;
    const double p = pred.probs[i];
    const double y = truth.classes[i];
    inter.add(p * y);
    sum_p.add(p);
    sum_y.add(y);
  }
  const double num = 2.0 * inter.value() + kDiceSmooth;
  const double den = sum_p.value() + sum_y.value() + kDiceSmooth;
  out.value = 1.0 - num / den;
  for (std::size_t i = 0; i < pred.probs.size(); ++i) {
    if (!(pred.validity[i] && truth.validity[i])) continue;
    const double y = truth.classes[i];
    out.gradient[i] = -(2.0 * y * den - num) / (den * den);
  }
  return out;
}

LossResult total_loss(const ProbabilityMap& pred, const BinaryMask& truth, const FocalParams& params,
                      const LossWeights& weights) {
  const LossResult bce = bce_loss(pred, truth);
  const LossResult dice = dice_loss(pred, truth);
  const LossResult focal = focal_loss(pred, truth, params);
  LossResult out;
  out.n_valid = bce.n_valid;
  out.value = weights.bce * bce.value + weights.dice * dice.value + weights.focal * focal.value;
  out.gradient.resize(bce.gradient.size());
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    out.gradient[i] = weights.bce * bce.gradient[i] + weights.dice * dice.gradient[i] +
                      weights.focal * focal.gradient[i];
  }
  return out;
}

}  // namespace lakewatch
