#include "sasv/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sasv {

void SoftAdcfConfig::validate() const {
  cost.validate();
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error("soft a-DCF: alpha must be positive");
  if (!(tau_init >= 0.0 && tau_init <= 1.0))
    throw Error("soft a-DCF: tau_init must lie in [0,1]");
}

namespace {

void check_batch(std::span<const double> scores, std::span<const TrialLabel> labels,
                 double alpha) {
  if (!(alpha > 0.0))
    throw Error("soft rates: alpha must be positive");
  if (scores.size() != labels.size())
    throw Error("soft rates: score/label length mismatch");
  if (scores.empty())
    throw Error("soft rates: empty batch");
}

// Signed margin entering the sigmoid: positive means "counted as an error".
double error_margin(TrialLabel l, double score, double tau, double alpha) {
  return l == TrialLabel::Target ? (tau - score) / alpha : (score - tau) / alpha;
}

} // namespace

DetectionRates soft_rates(std::span<const double> scores, std::span<const TrialLabel> labels,
                          double tau, double alpha) {
  check_batch(scores, labels, alpha);
  std::array<double, kNumClasses> sum{};
  std::array<std::size_t, kNumClasses> count{};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int c = class_index(labels[i]);
    sum[c] += sigmoid(error_margin(labels[i], scores[i], tau, alpha));
    ++count[c];
  }
  DetectionRates r;
  r.threshold = tau;
  std::array<double, kNumClasses> rate{};
  for (int c = 0; c < kNumClasses; ++c) {
    r.class_present[c] = count[c] > 0;
    rate[c] = count[c] > 0 ? sum[c] / static_cast<double>(count[c]) : 0.0;
  }
  r.p_miss_tar = rate[0];
  r.p_fa_non = rate[1];
  r.p_fa_spf = rate[2];
  return r;
}

LossOutput soft_adcf_loss(std::span<const double> scores, std::span<const TrialLabel> labels,
                          double tau, const SoftAdcfConfig &config) {
  check_batch(scores, labels, config.alpha);
  const CostModel &cm = config.cost;
  const DetectionRates r = soft_rates(scores, labels, tau, config.alpha);

  LossOutput out;
  out.value = adcf_from_rates(r, cm, config.normalize);
  const double scale = config.normalize ? 1.0 / cm.normalizer() : 1.0;

  std::array<std::size_t, kNumClasses> count{};
  for (TrialLabel l : labels)
    ++count[class_index(l)];
  const std::array<double, kNumClasses> weight{cm.c_miss_tar * cm.pi_tar,
                                               cm.c_fa_non * cm.pi_non,
                                               cm.c_fa_spf * cm.pi_spf};
  for (int c = 0; c < kNumClasses; ++c)
    out.class_missing[c] = count[c] == 0;

  out.grad_scores.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const TrialLabel l = labels[i];
    const int c = class_index(l);
    const double s = sigmoid(error_margin(l, scores[i], tau, config.alpha));
    // d(rate)/d(margin) scaled to d/d(score); margin slope is -1/alpha for
    // targets and +1/alpha otherwise.
    const double d_margin = weight[c] * scale * s * (1.0 - s) /
                            (static_cast<double>(count[c]) * config.alpha);
    const double g = l == TrialLabel::Target ? -d_margin : d_margin;
    out.grad_scores[i] = g;
    out.grad_tau -= g;
  }
  if (!config.tau_trainable)
    out.grad_tau = 0.0;
  return out;
}

LossOutput bce_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw Error("bce_loss: length mismatch (" + std::to_string(predictions.size()) + " vs " +
                std::to_string(targets.size()) + ")");
  if (predictions.empty())
    throw Error("bce_loss: empty batch");
  const double n = static_cast<double>(predictions.size());
  LossOutput out;
  out.grad_scores.resize(predictions.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kBceEpsilon, 1.0 - kBceEpsilon);
    const double y = targets[i];
    sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    out.grad_scores[i] = -(y / p - (1.0 - y) / (1.0 - p)) / n;
  }
  out.value = -sum / n;
  return out;
}

std::vector<double> sasv_targets(std::span<const TrialLabel> labels) {
  std::vector<double> y(labels.size());
  std::transform(labels.begin(), labels.end(), y.begin(),
                 [](TrialLabel l) { return sasv_positive(l) ? 1.0 : 0.0; });
  return y;
}

LossOutput combined_loss(std::span<const double> scores, std::span<const TrialLabel> labels,
                         double tau, const SoftAdcfConfig &config) {
  LossOutput a = soft_adcf_loss(scores, labels, tau, config);
  const LossOutput b = bce_loss(scores, sasv_targets(labels));
  a.value = (a.value + b.value) / 2.0;
  for (std::size_t i = 0; i < a.grad_scores.size(); ++i)
    a.grad_scores[i] = (a.grad_scores[i] + b.grad_scores[i]) / 2.0;
  a.grad_tau = a.grad_tau / 2.0;
  return a;
}

} // namespace sasv
