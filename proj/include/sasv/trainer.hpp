#pragma once

// Mini-batch training of either architecture against the soft a-DCF, BCE or
// combined loss, with model selection on development-set min a-DCF.

#include "sasv/checkpoint.hpp"
#include "sasv/losses.hpp"
#include "sasv/metrics.hpp"
#include "sasv/network.hpp"
#include "sasv/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sasv {

enum class LossMode { Adcf, Bce, Combined };
std::string_view to_string(LossMode m) noexcept;
LossMode parse_loss_mode(std::string_view name);

/// What the network is trained to accept. `Cm` trains a countermeasure head:
/// bonafide trials count as positives, spoofs as negatives.
enum class TrainTarget { Sasv, Cm };

enum class Architecture { Single, Parallel };

struct ModelConfig {
  Architecture architecture = Architecture::Parallel;
  /// Empty selects (256, 128, 64) for single and (128, 64) for parallel.
  std::vector<std::size_t> hidden;
  Activation activation;
  BranchInputSpec input{{FeatureSource::EnrollAsv, FeatureSource::TestAsv, FeatureSource::TestCm}};
  BranchInputSpec branch1{{FeatureSource::EnrollAsv, FeatureSource::TestAsv, FeatureSource::TestCm}};
  BranchInputSpec branch2{{FeatureSource::TestAsv, FeatureSource::TestCm}};
  /// Per-branch init seeds; default to seed and seed + 1.
  std::optional<std::uint64_t> init_seed1;
  std::optional<std::uint64_t> init_seed2;
  bool zero_init = false;

  std::vector<std::size_t> resolved_hidden() const;
};

SasvModel build_model(const ModelConfig &cfg, const EmbeddingStores &stores, std::uint64_t seed);

struct TrainConfig {
  OptimizerConfig optimizer;
  int batch_size = 64;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::Combined;
  TrainTarget target = TrainTarget::Sasv;
  bool stratify_batches = true;
  /// Consecutive non-improving epochs tolerated; 0 disables early stopping.
  int early_stop_patience = 20;
  /// Parallel model only: epochs of independent per-branch BCE training
  /// before joint training on the averaged output.
  int pretrain_epochs = 0;
  SoftAdcfConfig soft_adcf;
  /// Cost model for dev-set selection.
  CostModel eval_cost;
  bool eval_normalize = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_min_adcf = 0.0;
  double dev_argmin_tau = 0.0;
};

struct TrainReport {
  /// Epoch 0 is the initial model.
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_dev_adcf = 0.0;
  double best_dev_tau = 0.0;
  double final_tau = 0.0;
  bool early_stopped = false;
  std::size_t batches = 0;
  /// Batches lacking a class that the training set contains.
  std::size_t batches_missing_class = 0;
  std::optional<std::filesystem::path> checkpoint;
};

struct TrainResult {
  TrainReport report;
  Checkpoint best;
  Checkpoint last;
};

struct TrainOutputs {
  /// Best-epoch checkpoint, rewritten on every improvement.
  std::optional<std::filesystem::path> checkpoint;
  /// Receives `epoch,train_loss,dev_min_adcf,dev_argmin_tau` lines.
  std::ostream *log = nullptr;
};

/// Deterministic for a given seed. Throws before epoch 0 on unresolvable
/// embeddings and aborts on a non-finite batch loss.
TrainResult train(Checkpoint init, const std::vector<Trial> &train_trials,
                  const std::vector<Trial> &dev_trials, const EmbeddingStores &stores,
                  const TrainConfig &cfg, const TrainOutputs &outputs = {});

struct Evaluation {
  AdcfMinimum min;
  std::vector<ScoreRecord> scores;
  std::array<std::size_t, kNumClasses> class_counts{};
};

Evaluation evaluate(const SasvModel &model, const std::vector<Trial> &trials,
                    const EmbeddingStores &stores, const CostModel &cost, bool normalize = true);

/// Scores without labels or metrics.
std::vector<ScoreRecord> score_trials(const SasvModel &model, const std::vector<Trial> &trials,
                                      const EmbeddingStores &stores);

/// Splits trial indices into batches; when stratified, every batch holds at
/// least one trial of each class that has at least as many trials as there
/// are batches.
std::vector<std::vector<std::size_t>> make_batches(std::span<const TrialLabel> labels,
                                                   int batch_size, bool stratify,
                                                   std::uint64_t seed);

} // namespace sasv
