#pragma once

// Embedding stores, trial/score text formats and the seeded synthetic
// embedding generator.
//
// Embedding file:  `utt_id dim v1 ... vdim`
// Trial file:      `enroll_id test_id [target|nontarget|spoof]`
// Score file:      `enroll_id test_id score`
// All three carry an optional `#format:v1` first line (always written).

#include "sasv/core.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace sasv {

inline constexpr std::string_view kFormatHeader = "#format:v1";

enum class StoreRole { Asv, Cm };

std::string_view to_string(StoreRole r) noexcept;

class EmbeddingStore {
public:
  explicit EmbeddingStore(StoreRole role = StoreRole::Asv) : role_(role) {}

  /// Throws on duplicate id or a dimension differing from the first entry.
  void add(Embedding e);

  StoreRole role() const noexcept { return role_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }

  const Embedding *find(std::string_view utt_id) const;
  /// Throws naming the id when absent.
  const Embedding &at(std::string_view utt_id) const;

  /// Insertion order.
  const std::vector<Embedding> &items() const noexcept { return items_; }

  friend bool operator==(const EmbeddingStore &a, const EmbeddingStore &b) {
    return a.role_ == b.role_ && a.items_ == b.items_;
  }

private:
  StoreRole role_;
  std::size_t dim_ = 0;
  std::vector<Embedding> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingStore read_embeddings(std::istream &is, StoreRole role, std::string_view source = "<stream>");
EmbeddingStore read_embeddings(const std::filesystem::path &path, StoreRole role);
void write_embeddings(std::ostream &os, const EmbeddingStore &store);
void write_embeddings(const std::filesystem::path &path, const EmbeddingStore &store);

std::vector<Trial> read_trials(std::istream &is, std::string_view source = "<stream>");
std::vector<Trial> read_trials(const std::filesystem::path &path);
void write_trials(std::ostream &os, const std::vector<Trial> &trials);
void write_trials(const std::filesystem::path &path, const std::vector<Trial> &trials);

/// Refuses empty input and scores outside [0,1].
void write_scores(std::ostream &os, const std::vector<ScoreRecord> &records);
void write_scores(const std::filesystem::path &path, const std::vector<ScoreRecord> &records);
/// Records come back unlabeled; see attach_labels.
std::vector<ScoreRecord> read_scores(std::istream &is, std::string_view source = "<stream>");
std::vector<ScoreRecord> read_scores(const std::filesystem::path &path);

/// Joins score records with a trial list on (enroll_id, test_id). Both sides
/// must cover the identical trial set.
std::vector<ScoreRecord> attach_labels(const std::vector<ScoreRecord> &scores,
                                       const std::vector<Trial> &trials);

struct SynthConfig {
  int n_speakers = 50;
  int n_enroll_per_spk = 3;
  int n_bonafide_tests_per_spk = 15;
  int n_spoof_tests_per_spk = 12;
  int asv_dim = 8;
  int cm_dim = 8;
  double speaker_spread = 0.05;
  double spoof_asv_fidelity = 0.0;
  double cm_separation = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ground truth recorded by the generator, for auditing trial labels.
struct SynthUtterance {
  int speaker = 0;
  bool spoof = false;
};

struct SynthData {
  EmbeddingStore asv{StoreRole::Asv};
  EmbeddingStore cm{StoreRole::Cm};
  std::vector<Trial> train_trials;
  std::vector<Trial> dev_trials;
  /// Test utterance id -> origin; enrollment models are `spkNNNN`.
  std::unordered_map<std::string, SynthUtterance> test_meta;
  std::vector<int> train_speakers;
  std::vector<int> dev_speakers;
};

std::string speaker_model_id(int speaker);

SynthData generate_synthetic(const SynthConfig &cfg);

} // namespace sasv
