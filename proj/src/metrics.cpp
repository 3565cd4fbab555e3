#include "sasv/metrics.hpp"

#include "sasv/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace sasv {

void CostModel::validate() const {
  for (double pi : {pi_tar, pi_non, pi_spf})
    if (!(pi > 0.0 && pi < 1.0))
      throw Error("cost model: every prior must lie in (0,1)");
  if (std::abs(pi_tar + pi_non + pi_spf - 1.0) > 1e-9)
    throw Error("cost model: priors must sum to 1");
  for (double c : {c_miss_tar, c_fa_non, c_fa_spf})
    if (!(c >= 0.0) || !std::isfinite(c))
      throw Error("cost model: costs must be finite and non-negative");
  if (c_miss_tar == 0.0 && c_fa_non == 0.0 && c_fa_spf == 0.0)
    throw Error("cost model: at least one cost must be positive");
}

std::array<std::size_t, kNumClasses> LabeledScores::class_counts() const noexcept {
  std::array<std::size_t, kNumClasses> n{};
  for (TrialLabel l : labels)
    ++n[class_index(l)];
  return n;
}

LabeledScores labeled_scores(std::span<const ScoreRecord> records) {
  LabeledScores out;
  out.scores.reserve(records.size());
  out.labels.reserve(records.size());
  for (const auto &r : records) {
    if (!r.trial.label)
      throw Error("unlabeled trial '" + r.trial.enroll_id + " " + r.trial.test_id +
                  "' where labels are required");
    out.scores.push_back(r.score);
    out.labels.push_back(*r.trial.label);
  }
  return out;
}

namespace {

void check_input(const LabeledScores &s) {
  if (s.scores.empty())
    throw Error("no scores to evaluate");
  if (s.scores.size() != s.labels.size())
    throw Error("score/label length mismatch");
}

double rate(std::size_t count, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
}

DetectionRates rates_from_counts(const std::array<std::size_t, kNumClasses> &below_or_above,
                                 const std::array<std::size_t, kNumClasses> &totals,
                                 double tau) {
  DetectionRates r;
  r.threshold = tau;
  r.p_miss_tar = rate(below_or_above[0], totals[0]);
  r.p_fa_non = rate(below_or_above[1], totals[1]);
  r.p_fa_spf = rate(below_or_above[2], totals[2]);
  for (int c = 0; c < kNumClasses; ++c)
    r.class_present[c] = totals[c] > 0;
  return r;
}

} // namespace

DetectionRates hard_rates(const LabeledScores &s, double tau) {
  check_input(s);
  // [0]: targets below tau (misses); [1],[2]: nontargets/spoofs at or above tau.
  std::array<std::size_t, kNumClasses> hits{};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const TrialLabel l = s.labels[i];
    const bool accepted = s.scores[i] >= tau;
    if (l == TrialLabel::Target ? !accepted : accepted)
      ++hits[class_index(l)];
  }
  return rates_from_counts(hits, s.class_counts(), tau);
}

double adcf_from_rates(const DetectionRates &r, const CostModel &cost, bool normalize) {
  const double raw = cost.c_miss_tar * cost.pi_tar * r.p_miss_tar +
                     cost.c_fa_non * cost.pi_non * r.p_fa_non +
                     cost.c_fa_spf * cost.pi_spf * r.p_fa_spf;
  if (!normalize)
    return raw;
  const double z = cost.normalizer();
  if (!(z > 0.0))
    throw Error("a-DCF normalizer is zero (degenerate cost model)");
  return raw / z;
}

double adcf_at(const LabeledScores &s, double tau, const CostModel &cost, bool normalize) {
  return adcf_from_rates(hard_rates(s, tau), cost, normalize);
}

AdcfMinimum min_adcf(const LabeledScores &s, const CostModel &cost, bool normalize) {
  check_input(s);
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  const auto totals = s.class_counts();
  // Start with everything accepted: no misses, every impostor a false alarm.
  std::array<std::size_t, kNumClasses> hits{0, totals[1], totals[2]};

  const double lowest = s.scores[order.front()];
  const double highest = s.scores[order.back()];
  double tau = std::nextafter(lowest, -std::numeric_limits<double>::infinity());

  AdcfMinimum best;
  best.rates = rates_from_counts(hits, totals, tau);
  best.value = adcf_from_rates(best.rates, cost, normalize);
  best.threshold = tau;

  std::size_t i = 0;
  while (i < n) {
    // Reject every trial sharing the current score.
    const double v = s.scores[order[i]];
    while (i < n && s.scores[order[i]] == v) {
      const TrialLabel l = s.labels[order[i]];
      if (l == TrialLabel::Target)
        ++hits[0];
      else
        --hits[class_index(l)];
      ++i;
    }
    if (i < n) {
      const double next = s.scores[order[i]];
      tau = v + (next - v) / 2.0;
      if (!(tau > v))
        tau = next;
    } else {
      tau = std::nextafter(highest, std::numeric_limits<double>::infinity());
    }
    const DetectionRates r = rates_from_counts(hits, totals, tau);
    const double value = adcf_from_rates(r, cost, normalize);
    if (value < best.value) {
      best.value = value;
      best.threshold = tau;
      best.rates = r;
    }
  }
  return best;
}

ScoreHistogram score_histogram(const LabeledScores &s, std::size_t bins) {
  if (bins < 2)
    throw Error("histogram needs at least 2 bins");
  if (s.scores.size() != s.labels.size())
    throw Error("score/label length mismatch");
  ScoreHistogram h;
  h.bins = bins;
  for (auto &c : h.counts)
    c.assign(bins, 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = s.scores[i];
    check_probability(v, "histogram score");
    auto bin = static_cast<std::size_t>(v * static_cast<double>(bins));
    bin = std::min(bin, bins - 1);
    ++h.counts[class_index(s.labels[i])][bin];
  }
  return h;
}

void write_histogram_csv(std::ostream &os, const ScoreHistogram &h) {
  os << "bin_low,bin_high,target,nontarget,spoof\n";
  for (std::size_t i = 0; i < h.bins; ++i) {
    os << format_double(h.bin_low(i)) << ',' << format_double(h.bin_high(i)) << ','
       << h.counts[0][i] << ',' << h.counts[1][i] << ',' << h.counts[2][i] << '\n';
  }
}

} // namespace sasv
