#pragma once

// Training objectives over a batch of predicted SASV probabilities: the
// softened a-DCF, binary cross-entropy and their average. Each returns the
// value together with its gradient with respect to every prediction and the
// decision threshold.

#include "sasv/core.hpp"
#include "sasv/metrics.hpp"

#include <span>
#include <vector>

namespace sasv {

struct SoftAdcfConfig {
  CostModel cost;
  /// Temperature of the sigmoid that replaces the step function.
  double alpha = 0.05;
  bool tau_trainable = true;
  double tau_init = 0.5;
  bool normalize = true;

  void validate() const;
};

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_scores;
  double grad_tau = 0.0;
  /// Classes that were absent from the batch (their rate contributed 0).
  std::array<bool, kNumClasses> class_missing{false, false, false};
};

inline constexpr double kBceEpsilon = 1e-7;

/// Miss rate uses sigmoid((tau - y) / alpha), false alarms sigmoid((y - tau) / alpha).
DetectionRates soft_rates(std::span<const double> scores, std::span<const TrialLabel> labels,
                          double tau, double alpha);

LossOutput soft_adcf_loss(std::span<const double> scores, std::span<const TrialLabel> labels,
                          double tau, const SoftAdcfConfig &config);

/// Predictions are clamped to [eps, 1 - eps] before the logs.
LossOutput bce_loss(std::span<const double> predictions, std::span<const double> targets);

/// Mean of the soft a-DCF and the BCE against t_SASV targets.
LossOutput combined_loss(std::span<const double> scores, std::span<const TrialLabel> labels,
                         double tau, const SoftAdcfConfig &config);

/// t_SASV as 0/1 targets.
std::vector<double> sasv_targets(std::span<const TrialLabel> labels);

} // namespace sasv
