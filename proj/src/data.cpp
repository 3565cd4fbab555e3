#include "sasv/data.hpp"

#include "sasv/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace sasv {

std::string_view to_string(StoreRole r) noexcept { return r == StoreRole::Asv ? "asv" : "cm"; }

void EmbeddingStore::add(Embedding e) {
  if (items_.empty())
    dim_ = e.dim();
  else if (e.dim() != dim_)
    throw Error("embedding '" + e.utt_id() + "' has dim " + std::to_string(e.dim()) +
                ", store dim is " + std::to_string(dim_));
  auto [it, inserted] = index_.emplace(e.utt_id(), items_.size());
  if (!inserted)
    throw Error("duplicate utterance id '" + e.utt_id() + "'");
  items_.push_back(std::move(e));
}

const Embedding *EmbeddingStore::find(std::string_view utt_id) const {
  auto it = index_.find(std::string(utt_id));
  return it == index_.end() ? nullptr : &items_[it->second];
}

const Embedding &EmbeddingStore::at(std::string_view utt_id) const {
  if (const Embedding *e = find(utt_id))
    return *e;
  throw Error("no " + std::string(to_string(role_)) + " embedding for id '" +
              std::string(utt_id) + "'");
}

namespace {

std::ifstream open_in(const std::filesystem::path &path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open '" + path.string() + "' for reading");
  return f;
}

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw Error("cannot open '" + path.string() + "' for writing");
  return f;
}

void finish(std::ofstream &f, const std::filesystem::path &path) {
  f.flush();
  if (!f)
    throw Error("write failed for '" + path.string() + "'");
}

[[noreturn]] void fail_at(std::string_view source, std::size_t line, const std::string &what) {
  throw Error(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

// Iterates content lines, skipping blanks and the optional format header.
template <class Fn> void for_each_line(std::istream &is, std::string_view source, Fn &&fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto fields = split_fields(line);
    if (fields.empty())
      continue;
    if (fields.front().starts_with("#")) {
      if (lineno == 1 && fields.size() == 1 && fields.front() == kFormatHeader)
        continue;
      if (fields.front().starts_with("#format:"))
        fail_at(source, lineno, "unsupported format header '" + std::string(fields.front()) + "'");
      continue;
    }
    fn(fields, lineno);
  }
  if (is.bad())
    throw Error(std::string(source) + ": read error");
}

} // namespace

EmbeddingStore read_embeddings(std::istream &is, StoreRole role, std::string_view source) {
  EmbeddingStore store(role);
  for_each_line(is, source, [&](const std::vector<std::string_view> &f, std::size_t ln) {
    if (f.size() < 3)
      fail_at(source, ln, "expected `utt_id dim v1 ... vdim`");
    auto dim = parse_int(f[1]);
    if (!dim || *dim <= 0)
      fail_at(source, ln, "invalid dimension '" + std::string(f[1]) + "'");
    if (f.size() != static_cast<std::size_t>(*dim) + 2)
      fail_at(source, ln, "declared dim " + std::to_string(*dim) + " but found " +
                              std::to_string(f.size() - 2) + " values");
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(*dim));
    for (std::size_t i = 2; i < f.size(); ++i) {
      auto x = parse_double(f[i]);
      if (!x)
        fail_at(source, ln, "malformed value '" + std::string(f[i]) + "'");
      if (!std::isfinite(*x))
        fail_at(source, ln, "non-finite value");
      v.push_back(*x);
    }
    try {
      store.add(Embedding(std::string(f[0]), std::move(v)));
    } catch (const Error &e) {
      fail_at(source, ln, e.what());
    }
  });
  if (store.empty())
    throw Error(std::string(source) + ": no embeddings");
  return store;
}

EmbeddingStore read_embeddings(const std::filesystem::path &path, StoreRole role) {
  auto f = open_in(path);
  return read_embeddings(f, role, path.string());
}

void write_embeddings(std::ostream &os, const EmbeddingStore &store) {
  os << kFormatHeader << '\n';
  for (const auto &e : store.items()) {
    os << e.utt_id() << ' ' << e.dim();
    for (double v : e.values())
      os << ' ' << format_double(v);
    os << '\n';
  }
}

void write_embeddings(const std::filesystem::path &path, const EmbeddingStore &store) {
  auto f = open_out(path);
  write_embeddings(f, store);
  finish(f, path);
}

std::vector<Trial> read_trials(std::istream &is, std::string_view source) {
  std::vector<Trial> trials;
  for_each_line(is, source, [&](const std::vector<std::string_view> &f, std::size_t ln) {
    if (f.size() != 2 && f.size() != 3)
      fail_at(source, ln, "expected `enroll_id test_id [label]`");
    Trial t{std::string(f[0]), std::string(f[1]), std::nullopt};
    if (f.size() == 3) {
      t.label = parse_label(f[2]);
      if (!t.label)
        fail_at(source, ln, "unknown label '" + std::string(f[2]) +
                                "' (expected target, nontarget or spoof)");
    }
    trials.push_back(std::move(t));
  });
  return trials;
}

std::vector<Trial> read_trials(const std::filesystem::path &path) {
  auto f = open_in(path);
  return read_trials(f, path.string());
}

void write_trials(std::ostream &os, const std::vector<Trial> &trials) {
  os << kFormatHeader << '\n';
  for (const auto &t : trials) {
    os << t.enroll_id << ' ' << t.test_id;
    if (t.label)
      os << ' ' << to_string(*t.label);
    os << '\n';
  }
}

void write_trials(const std::filesystem::path &path, const std::vector<Trial> &trials) {
  auto f = open_out(path);
  write_trials(f, trials);
  finish(f, path);
}

void write_scores(std::ostream &os, const std::vector<ScoreRecord> &records) {
  if (records.empty())
    throw Error("refusing to write an empty score file");
  for (const auto &r : records)
    check_probability(r.score, "score for '" + r.trial.enroll_id + " " + r.trial.test_id + "'");
  os << kFormatHeader << '\n';
  for (const auto &r : records)
    os << r.trial.enroll_id << ' ' << r.trial.test_id << ' ' << format_score(r.score) << '\n';
}

void write_scores(const std::filesystem::path &path, const std::vector<ScoreRecord> &records) {
  std::ostringstream buf;
  write_scores(buf, records);
  auto f = open_out(path);
  f << buf.str();
  finish(f, path);
}

std::vector<ScoreRecord> read_scores(std::istream &is, std::string_view source) {
  std::vector<ScoreRecord> out;
  for_each_line(is, source, [&](const std::vector<std::string_view> &f, std::size_t ln) {
    if (f.size() != 3)
      fail_at(source, ln, "expected `enroll_id test_id score`");
    auto s = parse_double(f[2]);
    if (!s)
      fail_at(source, ln, "malformed score '" + std::string(f[2]) + "'");
    if (!(*s >= 0.0 && *s <= 1.0))
      fail_at(source, ln, "score outside [0,1]");
    out.push_back({Trial{std::string(f[0]), std::string(f[1]), std::nullopt}, *s});
  });
  return out;
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path &path) {
  auto f = open_in(path);
  return read_scores(f, path.string());
}

std::vector<ScoreRecord> attach_labels(const std::vector<ScoreRecord> &scores,
                                       const std::vector<Trial> &trials) {
  std::map<std::pair<std::string, std::string>, const Trial *> by_key;
  for (const auto &t : trials)
    if (!by_key.emplace(std::make_pair(t.enroll_id, t.test_id), &t).second)
      throw Error("duplicate trial '" + t.enroll_id + " " + t.test_id + "'");
  std::vector<ScoreRecord> out;
  out.reserve(scores.size());
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto &r : scores) {
    auto key = std::make_pair(r.trial.enroll_id, r.trial.test_id);
    auto it = by_key.find(key);
    if (it == by_key.end())
      throw Error("scored trial '" + key.first + " " + key.second + "' is not in the trial list");
    if (!seen.insert(key).second)
      throw Error("duplicate scored trial '" + key.first + " " + key.second + "'");
    out.push_back({*it->second, r.score});
  }
  if (seen.size() != by_key.size())
    throw Error("score file covers " + std::to_string(seen.size()) + " of " +
                std::to_string(by_key.size()) + " trials");
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SynthConfig::validate() const {
  const std::pair<const char *, int> counts[] = {
      {"n_speakers", n_speakers},
      {"n_enroll_per_spk", n_enroll_per_spk},
      {"n_bonafide_tests_per_spk", n_bonafide_tests_per_spk},
      {"n_spoof_tests_per_spk", n_spoof_tests_per_spk}};
  for (const auto &[name, v] : counts)
    if (v < 1)
      throw Error(std::string("synthetic config: ") + name + " must be >= 1, got " + std::to_string(v));
  if (asv_dim < 2 || cm_dim < 2)
    throw Error("synthetic config: dims must be >= 2");
  if (!(speaker_spread > 0.0))
    throw Error("synthetic config: speaker_spread must be positive");
  if (!(spoof_asv_fidelity >= 0.0 && spoof_asv_fidelity <= 1.0))
    throw Error("synthetic config: spoof_asv_fidelity must lie in [0,1]");
  if (!(cm_separation >= 0.0) || !std::isfinite(cm_separation))
    throw Error("synthetic config: cm_separation must be >= 0");
  if (n_speakers < 4)
    throw Error("synthetic config: nontarget trials need at least 2 speakers in each of the "
                "train and dev splits (n_speakers >= 4)");
}

std::string speaker_model_id(int speaker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%04d", speaker);
  return buf;
}

namespace {

std::string test_utt_id(int speaker, bool spoof, int j) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "spk%04d_%s%03d", speaker, spoof ? "spf" : "bon", j);
  return buf;
}

class Sampler {
public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::vector<double> gaussian(int dim, double stddev) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (auto &x : v)
      x = stddev * normal_(rng_);
    return v;
  }

  std::vector<double> unit_vector(int dim) {
    for (;;) {
      auto v = gaussian(dim, 1.0);
      if (normalize(v))
        return v;
    }
  }

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  template <class It> void shuffle(It first, It last) { std::shuffle(first, last, rng_); }

  static bool normalize(std::vector<double> &v) {
    double ss = 0.0;
    for (double x : v)
      ss += x * x;
    if (!(ss > 0.0))
      return false;
    const double inv = 1.0 / std::sqrt(ss);
    for (auto &x : v)
      x *= inv;
    return true;
  }

private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::vector<double> noisy_unit(Sampler &rng, const std::vector<double> &center, double spread) {
  auto v = rng.gaussian(static_cast<int>(center.size()), spread);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] += center[i];
  if (!Sampler::normalize(v))
    return center;
  return v;
}

std::vector<double> cm_vector(Sampler &rng, int dim, double offset) {
  auto v = rng.gaussian(dim, 1.0);
  v[0] += offset;
  return v;
}

} // namespace

SynthData generate_synthetic(const SynthConfig &cfg) {
  cfg.validate();
  Sampler rng(cfg.seed);
  SynthData out;

  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(cfg.n_speakers));
  for (int s = 0; s < cfg.n_speakers; ++s)
    centroids.push_back(rng.unit_vector(cfg.asv_dim));

  std::vector<int> order(static_cast<std::size_t>(cfg.n_speakers));
  for (int s = 0; s < cfg.n_speakers; ++s)
    order[static_cast<std::size_t>(s)] = s;
  rng.shuffle(order.begin(), order.end());
  const int n_dev = std::max(2, static_cast<int>(std::lround(0.2 * cfg.n_speakers)));
  out.train_speakers.assign(order.begin(), order.end() - n_dev);
  out.dev_speakers.assign(order.end() - n_dev, order.end());
  std::sort(out.train_speakers.begin(), out.train_speakers.end());
  std::sort(out.dev_speakers.begin(), out.dev_speakers.end());

  for (int s = 0; s < cfg.n_speakers; ++s) {
    std::vector<double> model(static_cast<std::size_t>(cfg.asv_dim), 0.0);
    for (int j = 0; j < cfg.n_enroll_per_spk; ++j) {
      auto e = noisy_unit(rng, centroids[static_cast<std::size_t>(s)], cfg.speaker_spread);
      for (std::size_t i = 0; i < model.size(); ++i)
        model[i] += e[i];
    }
    if (!Sampler::normalize(model))
      model = centroids[static_cast<std::size_t>(s)];
    out.asv.add(Embedding(speaker_model_id(s), std::move(model)));
  }

  const double half_sep = cfg.cm_separation / 2.0;
  const double f = cfg.spoof_asv_fidelity;
  for (int s = 0; s < cfg.n_speakers; ++s) {
    const auto &c = centroids[static_cast<std::size_t>(s)];
    for (int j = 0; j < cfg.n_bonafide_tests_per_spk; ++j) {
      const std::string id = test_utt_id(s, false, j);
      out.asv.add(Embedding(id, noisy_unit(rng, c, cfg.speaker_spread)));
      out.cm.add(Embedding(id, cm_vector(rng, cfg.cm_dim, half_sep)));
      out.test_meta.emplace(id, SynthUtterance{s, false});
    }
    for (int j = 0; j < cfg.n_spoof_tests_per_spk; ++j) {
      const std::string id = test_utt_id(s, true, j);
      const auto r = rng.unit_vector(cfg.asv_dim);
      std::vector<double> mimic(c.size());
      for (std::size_t i = 0; i < c.size(); ++i)
        mimic[i] = f * c[i] + (1.0 - f) * r[i];
      if (!Sampler::normalize(mimic))
        mimic = r;
      out.asv.add(Embedding(id, noisy_unit(rng, mimic, cfg.speaker_spread)));
      out.cm.add(Embedding(id, cm_vector(rng, cfg.cm_dim, -half_sep)));
      out.test_meta.emplace(id, SynthUtterance{s, true});
    }
  }

  auto build_trials = [&](const std::vector<int> &speakers, std::vector<Trial> &trials) {
    const int n = static_cast<int>(speakers.size());
    for (int k = 0; k < n; ++k) {
      const int s = speakers[static_cast<std::size_t>(k)];
      for (int j = 0; j < cfg.n_bonafide_tests_per_spk; ++j) {
        const std::string id = test_utt_id(s, false, j);
        trials.push_back({speaker_model_id(s), id, TrialLabel::Target});
        int other = rng.uniform_int(0, n - 2);
        if (other >= k)
          ++other;
        trials.push_back(
            {speaker_model_id(speakers[static_cast<std::size_t>(other)]), id, TrialLabel::Nontarget});
      }
      for (int j = 0; j < cfg.n_spoof_tests_per_spk; ++j)
        trials.push_back({speaker_model_id(s), test_utt_id(s, true, j), TrialLabel::Spoof});
    }
  };
  build_trials(out.train_speakers, out.train_trials);
  build_trials(out.dev_speakers, out.dev_trials);
  return out;
}

} // namespace sasv
