#pragma once

// Hard (evaluation-time) a-DCF: rates at a threshold, the weighted cost, the
// minimum over a threshold sweep, and per-class score histograms.

#include "sasv/core.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace sasv {

struct CostModel {
  double c_miss_tar = 1.0;
  double c_fa_non = 10.0;
  double c_fa_spf = 10.0;
  double pi_tar = 0.9405;
  double pi_non = 0.0095;
  double pi_spf = 0.05;

  /// Throws on priors outside (0,1), priors not summing to 1, negative costs
  /// or all-zero costs.
  void validate() const;

  /// Cost of the best trivial system: min(always reject, always accept).
  double normalizer() const noexcept {
    const double reject_all = c_miss_tar * pi_tar;
    const double accept_all = c_fa_non * pi_non + c_fa_spf * pi_spf;
    return reject_all < accept_all ? reject_all : accept_all;
  }
};

struct DetectionRates {
  double p_miss_tar = 0.0;
  double p_fa_non = 0.0;
  double p_fa_spf = 0.0;
  double threshold = 0.0;
  /// false when the class had no trials; its rate is then reported as 0.
  std::array<bool, kNumClasses> class_present{true, true, true};
};

/// Flat (score, label) view used by the numeric routines.
struct LabeledScores {
  std::vector<double> scores;
  std::vector<TrialLabel> labels;

  std::size_t size() const noexcept { return scores.size(); }
  std::array<std::size_t, kNumClasses> class_counts() const noexcept;
};

/// Throws if any record is unlabeled.
LabeledScores labeled_scores(std::span<const ScoreRecord> records);

/// Miss counts `score < tau`; false alarms count `score >= tau`.
DetectionRates hard_rates(const LabeledScores &s, double tau);

double adcf_from_rates(const DetectionRates &r, const CostModel &cost, bool normalize = true);

double adcf_at(const LabeledScores &s, double tau, const CostModel &cost,
               bool normalize = true);

struct AdcfMinimum {
  double value = 0.0;
  double threshold = 0.0;
  DetectionRates rates;
};

/// Sweeps the thresholds {below min, midpoints of consecutive distinct scores,
/// above max}; ties resolve to the smallest threshold.
AdcfMinimum min_adcf(const LabeledScores &s, const CostModel &cost, bool normalize = true);

struct ScoreHistogram {
  std::size_t bins = 0;
  std::array<std::vector<std::size_t>, kNumClasses> counts;

  double bin_low(std::size_t i) const noexcept {
    return static_cast<double>(i) / static_cast<double>(bins);
  }
  double bin_high(std::size_t i) const noexcept {
    return static_cast<double>(i + 1) / static_cast<double>(bins);
  }
};

/// Uniform bins over [0,1]; a score of exactly 1 lands in the last bin.
ScoreHistogram score_histogram(const LabeledScores &s, std::size_t bins);

/// `bin_low,bin_high,target,nontarget,spoof`, one row per bin.
void write_histogram_csv(std::ostream &os, const ScoreHistogram &h);

} // namespace sasv
