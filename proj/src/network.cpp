#include "sasv/network.hpp"

#include "sasv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace sasv {

double Activation::apply(double z) const noexcept {
  switch (kind) {
  case ActivationKind::LeakyRelu:
    return z > 0.0 ? z : slope * z;
  case ActivationKind::Relu:
    return z > 0.0 ? z : 0.0;
  case ActivationKind::Tanh:
    return std::tanh(z);
  }
  return z;
}

double Activation::derivative(double z, double a) const noexcept {
  switch (kind) {
  case ActivationKind::LeakyRelu:
    return z > 0.0 ? 1.0 : slope;
  case ActivationKind::Relu:
    return z > 0.0 ? 1.0 : 0.0;
  case ActivationKind::Tanh:
    return 1.0 - a * a;
  }
  return 1.0;
}

std::string_view to_string(ActivationKind k) noexcept {
  switch (k) {
  case ActivationKind::LeakyRelu:
    return "leaky_relu";
  case ActivationKind::Relu:
    return "relu";
  case ActivationKind::Tanh:
    return "tanh";
  }
  return "?";
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "leaky_relu")
    return ActivationKind::LeakyRelu;
  if (name == "relu")
    return ActivationKind::Relu;
  if (name == "tanh")
    return ActivationKind::Tanh;
  throw Error("unknown activation '" + std::string(name) + "'");
}

MlpModel::MlpModel(std::vector<std::size_t> dims, Activation hidden)
    : dims_(std::move(dims)), hidden_(hidden) {
  if (dims_.size() < 2)
    throw Error("MLP needs at least an input and an output width");
  if (dims_.back() != 1)
    throw Error("MLP output width must be 1");
  for (std::size_t d : dims_)
    if (d == 0)
      throw Error("MLP layer widths must be positive");
  layers_.reserve(dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    DenseLayer layer;
    layer.in = dims_[l];
    layer.out = dims_[l + 1];
    layer.weights.assign(layer.in * layer.out, 0.0);
    layer.bias.assign(layer.out, 0.0);
    layers_.push_back(std::move(layer));
  }
}

MlpModel MlpModel::glorot(std::vector<std::size_t> dims, Activation hidden, std::uint64_t seed) {
  MlpModel m(std::move(dims), hidden);
  std::mt19937_64 rng(seed);
  for (auto &layer : m.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto &w : layer.weights)
      w = dist(rng);
  }
  return m;
}

std::size_t MlpModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto &l : layers_)
    n += l.weights.size() + l.bias.size();
  return n;
}

void MlpModel::validate() const {
  if (dims_.size() < 2 || dims_.back() != 1 || layers_.size() + 1 != dims_.size())
    throw Error("MLP: inconsistent layer dims");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto &layer = layers_[l];
    if (layer.in != dims_[l] || layer.out != dims_[l + 1] ||
        layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out)
      throw Error("MLP: layer " + std::to_string(l) + " has the wrong shape");
    for (double v : layer.weights)
      if (!std::isfinite(v))
        throw Error("MLP: non-finite weight in layer " + std::to_string(l));
    for (double v : layer.bias)
      if (!std::isfinite(v))
        throw Error("MLP: non-finite bias in layer " + std::to_string(l));
  }
}

MlpGrad MlpGrad::zeros_like(const MlpModel &m) {
  MlpGrad g;
  g.layers = m.layers();
  g.set_zero();
  return g;
}

void MlpGrad::set_zero() noexcept {
  for (auto &l : layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

double forward(const MlpModel &model, std::span<const double> x, MlpCache *cache) {
  if (x.size() != model.input_dim())
    throw Error("forward: input has " + std::to_string(x.size()) + " features, model expects " +
                std::to_string(model.input_dim()));
  const auto &k = kernels::active();
  const auto &layers = model.layers();
  const std::size_t n_layers = layers.size();

  MlpCache local;
  MlpCache &c = cache ? *cache : local;
  c.model = &model;
  c.generation = model.generation();
  c.input.assign(x.begin(), x.end());
  c.pre.resize(n_layers);
  c.post.resize(n_layers);

  const double *in = c.input.data();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto &layer = layers[l];
    c.pre[l].resize(layer.out);
    c.post[l].resize(layer.out);
    k.gemv(layer.weights.data(), in, layer.bias.data(), c.pre[l].data(), layer.out, layer.in);
    if (l + 1 < n_layers) {
      for (std::size_t j = 0; j < layer.out; ++j)
        c.post[l][j] = model.activation().apply(c.pre[l][j]);
    } else {
      c.post[l][0] = sigmoid(c.pre[l][0]);
    }
    in = c.post[l].data();
  }
  c.output = c.post.back()[0];
  return c.output;
}

void backward(const MlpModel &model, const MlpCache &cache, double dl_dp, MlpGrad &grad) {
  if (cache.model != &model || cache.generation != model.generation() ||
      cache.pre.size() != model.layers().size())
    throw Error("backward: cache does not belong to the current model parameters");
  if (grad.layers.size() != model.layers().size())
    throw Error("backward: gradient buffer shape mismatch");
  const auto &k = kernels::active();
  const auto &layers = model.layers();

  const double p = cache.output;
  std::vector<double> delta{dl_dp * p * (1.0 - p)};
  std::vector<double> next;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto &layer = layers[l];
    auto &g = grad.layers[l];
    const double *in = l == 0 ? cache.input.data() : cache.post[l - 1].data();
    k.ger(g.weights.data(), delta.data(), in, layer.out, layer.in);
    k.axpy(1.0, delta.data(), g.bias.data(), layer.out);
    if (l == 0)
      break;
    next.resize(layer.in);
    k.gemv_t(layer.weights.data(), delta.data(), next.data(), layer.out, layer.in);
    const auto &z = cache.pre[l - 1];
    const auto &a = cache.post[l - 1];
    for (std::size_t j = 0; j < layer.in; ++j)
      next[j] *= model.activation().derivative(z[j], a[j]);
    delta.swap(next);
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(FeatureSource s) noexcept {
  switch (s) {
  case FeatureSource::EnrollAsv:
    return "enroll_asv";
  case FeatureSource::TestAsv:
    return "test_asv";
  case FeatureSource::TestCm:
    return "test_cm";
  }
  return "?";
}

FeatureSource parse_feature_source(std::string_view name) {
  if (name == "enroll_asv")
    return FeatureSource::EnrollAsv;
  if (name == "test_asv")
    return FeatureSource::TestAsv;
  if (name == "test_cm")
    return FeatureSource::TestCm;
  throw Error("unknown feature source '" + std::string(name) +
              "' (expected enroll_asv, test_asv or test_cm)");
}

void BranchInputSpec::validate() const {
  if (sources.empty())
    throw Error("branch input spec is empty");
  std::set<FeatureSource> seen;
  for (auto s : sources)
    if (!seen.insert(s).second)
      throw Error("branch input spec lists '" + std::string(to_string(s)) + "' twice");
  if (!seen.contains(FeatureSource::TestAsv) && !seen.contains(FeatureSource::TestCm))
    throw Error("branch input spec must include test_asv or test_cm");
}

std::size_t BranchInputSpec::input_dim(const EmbeddingStore *asv, const EmbeddingStore *cm) const {
  std::size_t d = 0;
  for (auto s : sources) {
    const EmbeddingStore *store = s == FeatureSource::TestCm ? cm : asv;
    if (store == nullptr)
      throw Error("branch input '" + std::string(to_string(s)) + "' needs a " +
                  (s == FeatureSource::TestCm ? "CM" : "ASV") + " embedding store");
    d += store->dim();
  }
  return d;
}

void concat_features(const Trial &trial, const BranchInputSpec &spec,
                     const EmbeddingStores &stores, std::vector<double> &out) {
  out.clear();
  for (auto s : spec.sources) {
    const EmbeddingStore *store = s == FeatureSource::TestCm ? stores.cm : stores.asv;
    if (store == nullptr)
      throw Error("branch input '" + std::string(to_string(s)) + "' has no embedding store");
    const std::string &id = s == FeatureSource::EnrollAsv ? trial.enroll_id : trial.test_id;
    const Embedding &e = store->at(id);
    out.insert(out.end(), e.values().begin(), e.values().end());
  }
}

std::vector<double> concat_features(const Trial &trial, const BranchInputSpec &spec,
                                    const EmbeddingStores &stores) {
  std::vector<double> out;
  concat_features(trial, spec, stores, out);
  return out;
}

void SingleModel::validate() const {
  net.validate();
  spec.validate();
}

void ParallelModel::validate() const {
  branch1.validate();
  branch2.validate();
  spec1.validate();
  spec2.validate();
  const auto &d1 = branch1.dims();
  const auto &d2 = branch2.dims();
  if (d1.size() != d2.size() || !std::equal(d1.begin() + 1, d1.end(), d2.begin() + 1))
    throw Error("parallel branches must share the same hidden topology");
  if (!(branch1.activation() == branch2.activation()))
    throw Error("parallel branches must share the same activation");
}

ParallelOutput parallel_forward(const ParallelModel &pm, std::span<const double> x1,
                                std::span<const double> x2) {
  ParallelOutput out;
  out.p1 = forward(pm.branch1, x1, &out.cache1);
  out.p2 = forward(pm.branch2, x2, &out.cache2);
  out.p_sasv = (out.p1 + out.p2) / 2.0;
  return out;
}

ParallelOutput parallel_forward(const ParallelModel &pm, const Trial &trial,
                                const EmbeddingStores &stores) {
  const auto x1 = concat_features(trial, pm.spec1, stores);
  const auto x2 = concat_features(trial, pm.spec2, stores);
  return parallel_forward(pm, x1, x2);
}

void parallel_backward(const ParallelModel &pm, const ParallelOutput &out, double dl_dp_sasv,
                       MlpGrad &grad1, MlpGrad &grad2) {
  const double half = dl_dp_sasv / 2.0;
  backward(pm.branch1, out.cache1, half, grad1);
  backward(pm.branch2, out.cache2, half, grad2);
}

double score_trial(const SasvModel &model, const Trial &trial, const EmbeddingStores &stores) {
  return std::visit(
      [&](const auto &m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SingleModel>) {
          return forward(m.net, concat_features(trial, m.spec, stores));
        } else {
          return parallel_forward(m, trial, stores).p_sasv;
        }
      },
      model);
}

} // namespace sasv
