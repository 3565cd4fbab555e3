#pragma once

// Feed-forward SASV classifiers: a single embedding-fusion MLP and the
// parallel pair of topology-identical MLPs whose sigmoid outputs are averaged.
// Forward and backward passes are exact and analytic.

#include "sasv/core.hpp"
#include "sasv/data.hpp"

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace sasv {

enum class ActivationKind { LeakyRelu, Relu, Tanh };

struct Activation {
  ActivationKind kind = ActivationKind::LeakyRelu;
  double slope = 0.3; // LeakyRelu only

  double apply(double z) const noexcept;
  /// Derivative given the pre-activation z and post-activation a.
  double derivative(double z, double a) const noexcept;

  friend bool operator==(const Activation &, const Activation &) = default;
};

std::string_view to_string(ActivationKind k) noexcept;
ActivationKind parse_activation(std::string_view name);

/// Row-major weights, shape (out, in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer &, const DenseLayer &) = default;
};

class MlpModel {
public:
  MlpModel() = default;
  /// Zero-initialized network; dims = {d_in, h1, ..., hk, 1}.
  MlpModel(std::vector<std::size_t> dims, Activation hidden);

  /// Uniform Glorot weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpModel glorot(std::vector<std::size_t> dims, Activation hidden, std::uint64_t seed);

  const std::vector<std::size_t> &dims() const noexcept { return dims_; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  const Activation &activation() const noexcept { return hidden_; }
  const std::vector<DenseLayer> &layers() const noexcept { return layers_; }
  /// Bumps the generation so caches from earlier forward passes are rejected.
  std::vector<DenseLayer> &mutable_layers() noexcept {
    ++generation_;
    return layers_;
  }
  std::uint64_t generation() const noexcept { return generation_; }
  std::size_t parameter_count() const noexcept;

  /// Shape, output width and finiteness checks.
  void validate() const;

  friend bool operator==(const MlpModel &a, const MlpModel &b) {
    return a.dims_ == b.dims_ && a.hidden_ == b.hidden_ && a.layers_ == b.layers_;
  }

private:
  std::vector<std::size_t> dims_;
  Activation hidden_;
  std::vector<DenseLayer> layers_;
  std::uint64_t generation_ = 0;
};

/// Per-layer activations recorded by forward(); layer l consumes post[l-1]
/// (or the input for l = 0).
struct MlpCache {
  const MlpModel *model = nullptr;
  std::uint64_t generation = 0;
  std::vector<double> input;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  double output = 0.0;
};

/// Parameter gradients, shaped like the model's layers.
struct MlpGrad {
  std::vector<DenseLayer> layers;

  static MlpGrad zeros_like(const MlpModel &m);
  void set_zero() noexcept;
};

double forward(const MlpModel &model, std::span<const double> x, MlpCache *cache = nullptr);

/// Accumulates dL/dparams for dL/dp into `grad`.
void backward(const MlpModel &model, const MlpCache &cache, double dl_dp, MlpGrad &grad);

// ---------------------------------------------------------------------------
// Branch inputs

enum class FeatureSource { EnrollAsv, TestAsv, TestCm };

std::string_view to_string(FeatureSource s) noexcept;
FeatureSource parse_feature_source(std::string_view name);

struct BranchInputSpec {
  std::vector<FeatureSource> sources;

  /// Nonempty, no duplicates, sees the test utterance.
  void validate() const;
  std::size_t input_dim(const EmbeddingStore *asv, const EmbeddingStore *cm) const;

  friend bool operator==(const BranchInputSpec &, const BranchInputSpec &) = default;
};

struct EmbeddingStores {
  const EmbeddingStore *asv = nullptr;
  const EmbeddingStore *cm = nullptr;
};

/// Concatenates the referenced embeddings in spec order.
std::vector<double> concat_features(const Trial &trial, const BranchInputSpec &spec,
                                    const EmbeddingStores &stores);
void concat_features(const Trial &trial, const BranchInputSpec &spec,
                     const EmbeddingStores &stores, std::vector<double> &out);

// ---------------------------------------------------------------------------
// Models

struct SingleModel {
  MlpModel net;
  BranchInputSpec spec;

  void validate() const;
  friend bool operator==(const SingleModel &, const SingleModel &) = default;
};

struct ParallelModel {
  MlpModel branch1;
  MlpModel branch2;
  BranchInputSpec spec1;
  BranchInputSpec spec2;

  /// Rejects differing topology after the input layer.
  void validate() const;
  friend bool operator==(const ParallelModel &, const ParallelModel &) = default;
};

struct ParallelOutput {
  double p_sasv = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  MlpCache cache1;
  MlpCache cache2;
};

ParallelOutput parallel_forward(const ParallelModel &pm, std::span<const double> x1,
                                std::span<const double> x2);
ParallelOutput parallel_forward(const ParallelModel &pm, const Trial &trial,
                                const EmbeddingStores &stores);

/// Routes half of dL/dp_sasv into each branch's output node.
void parallel_backward(const ParallelModel &pm, const ParallelOutput &out, double dl_dp_sasv,
                       MlpGrad &grad1, MlpGrad &grad2);

using SasvModel = std::variant<SingleModel, ParallelModel>;

/// SASV probability of one trial under either architecture.
double score_trial(const SasvModel &model, const Trial &trial, const EmbeddingStores &stores);

} // namespace sasv
