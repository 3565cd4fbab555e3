#include "sasv/core.hpp"

#include "sasv/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace sasv {

Embedding::Embedding(std::string utt_id, std::vector<double> values)
    : utt_id_(std::move(utt_id)), values_(std::move(values)) {
  if (values_.empty())
    throw Error("embedding '" + utt_id_ + "' has no values");
  for (double v : values_)
    if (!std::isfinite(v))
      throw Error("embedding '" + utt_id_ + "' contains a non-finite value");
}

std::string_view to_string(TrialLabel l) noexcept {
  switch (l) {
  case TrialLabel::Target:
    return "target";
  case TrialLabel::Nontarget:
    return "nontarget";
  case TrialLabel::Spoof:
    return "spoof";
  }
  return "?";
}

std::optional<TrialLabel> parse_label(std::string_view token) {
  std::string lower(token);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "target")
    return TrialLabel::Target;
  if (lower == "nontarget")
    return TrialLabel::Nontarget;
  if (lower == "spoof")
    return TrialLabel::Spoof;
  return std::nullopt;
}

void check_probability(double p, std::string_view what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw Error(std::string(what) + " must lie in [0,1], got " + std::to_string(p));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) +
                " vs " + std::to_string(b.size()) + ")");
  const auto &k = kernels::active();
  const double aa = k.dot(a.data(), a.data(), a.size());
  const double bb = k.dot(b.data(), b.data(), b.size());
  if (!(aa > 0.0) || !(bb > 0.0))
    throw Error("cosine_similarity: zero-norm embedding");
  const double c = k.dot(a.data(), b.data(), a.size()) / (std::sqrt(aa) * std::sqrt(bb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const Embedding &a, const Embedding &b) {
  try {
    return cosine_similarity(a.values(), b.values());
  } catch (const Error &e) {
    throw Error(std::string(e.what()) + " for '" + a.utt_id() + "' / '" + b.utt_id() + "'");
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double asv_probability(const Embedding &enr, const Embedding &tst) {
  return sigmoid(cosine_similarity(enr, tst));
}

double fuse_scores(double p_asv, double p_cm) {
  check_probability(p_asv, "ASV probability");
  check_probability(p_cm, "CM probability");
  return (p_asv + p_cm) / 2.0;
}

} // namespace sasv
