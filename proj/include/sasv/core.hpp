#pragma once

// Domain types shared across the toolkit and the elementary scoring
// operations: cosine ASV probability, sigmoid and score-sum fusion.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sasv {

/// Every recoverable failure in the toolkit surfaces as this exception.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Embedding {
public:
  Embedding() = default;
  /// Throws on empty or non-finite values.
  Embedding(std::string utt_id, std::vector<double> values);

  const std::string &utt_id() const noexcept { return utt_id_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }

  friend bool operator==(const Embedding &, const Embedding &) = default;

private:
  std::string utt_id_;
  std::vector<double> values_;
};

enum class TrialLabel { Target, Nontarget, Spoof };

inline constexpr int kNumClasses = 3;

constexpr int class_index(TrialLabel l) noexcept { return static_cast<int>(l); }

/// t_SASV: accept only same-speaker bonafide trials.
constexpr bool sasv_positive(TrialLabel l) noexcept { return l == TrialLabel::Target; }
/// t_ASV (only meaningful for bonafide tests).
constexpr bool asv_positive(TrialLabel l) noexcept { return l == TrialLabel::Target; }
/// t_CM: bonafide test utterance.
constexpr bool cm_positive(TrialLabel l) noexcept { return l != TrialLabel::Spoof; }

std::string_view to_string(TrialLabel l) noexcept;
/// Case-insensitive; accepts exactly target/nontarget/spoof.
std::optional<TrialLabel> parse_label(std::string_view token);

struct Trial {
  std::string enroll_id;
  std::string test_id;
  std::optional<TrialLabel> label;

  friend bool operator==(const Trial &, const Trial &) = default;
};

struct ScoreRecord {
  Trial trial;
  double score = 0.0;

  friend bool operator==(const ScoreRecord &, const ScoreRecord &) = default;
};

/// Throws unless 0 <= score <= 1.
void check_probability(double p, std::string_view what);

double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const Embedding &a, const Embedding &b);

double sigmoid(double x) noexcept;

/// sigmoid of the cosine similarity; range (sigmoid(-1), sigmoid(1)).
double asv_probability(const Embedding &enr, const Embedding &tst);

/// Score-sum fusion of independent ASV and CM probabilities.
double fuse_scores(double p_asv, double p_cm);

} // namespace sasv
