#include "sasv/trainer.hpp"

#include "sasv/format.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace sasv {

std::string_view to_string(LossMode m) noexcept {
  switch (m) {
  case LossMode::Adcf:
    return "adcf";
  case LossMode::Bce:
    return "bce";
  case LossMode::Combined:
    return "combined";
  }
  return "?";
}

LossMode parse_loss_mode(std::string_view name) {
  if (name == "adcf")
    return LossMode::Adcf;
  if (name == "bce")
    return LossMode::Bce;
  if (name == "combined")
    return LossMode::Combined;
  throw Error("unknown loss '" + std::string(name) + "' (expected adcf, bce or combined)");
}

std::vector<std::size_t> ModelConfig::resolved_hidden() const {
  if (!hidden.empty())
    return hidden;
  if (architecture == Architecture::Single)
    return {256, 128, 64};
  return {128, 64};
}

SasvModel build_model(const ModelConfig &cfg, const EmbeddingStores &stores, std::uint64_t seed) {
  const auto hidden = cfg.resolved_hidden();
  auto make = [&](const BranchInputSpec &spec, std::uint64_t s) {
    spec.validate();
    std::vector<std::size_t> dims{spec.input_dim(stores.asv, stores.cm)};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    return cfg.zero_init ? MlpModel(dims, cfg.activation) : MlpModel::glorot(dims, cfg.activation, s);
  };
  const std::uint64_t s1 = cfg.init_seed1.value_or(seed);
  const std::uint64_t s2 = cfg.init_seed2.value_or(seed + 1);
  if (cfg.architecture == Architecture::Single)
    return SingleModel{make(cfg.input, s1), cfg.input};
  ParallelModel pm{make(cfg.branch1, s1), make(cfg.branch2, s2), cfg.branch1, cfg.branch2};
  pm.validate();
  return pm;
}

void TrainConfig::validate() const {
  optimizer.validate();
  soft_adcf.validate();
  eval_cost.validate();
  if (batch_size < 1)
    throw Error("train: batch_size must be >= 1");
  if (loss_mode != LossMode::Bce && batch_size < 3)
    throw Error("train: batch_size must be >= 3 when the loss uses a-DCF");
  if (max_epochs < 0 || pretrain_epochs < 0)
    throw Error("train: epoch counts must be >= 0");
  if (early_stop_patience < 0)
    throw Error("train: early_stop_patience must be >= 0");
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const TrialLabel> labels,
                                                   int batch_size, bool stratify,
                                                   std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (n == 0)
    return {};
  std::mt19937_64 rng(seed);
  const auto bs = static_cast<std::size_t>(std::max(batch_size, 1));
  std::size_t nb = (n + bs - 1) / bs;

  std::vector<std::size_t> order;
  order.reserve(n);
  if (stratify) {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < n; ++i)
      by_class[class_index(labels[i])].push_back(i);
    for (auto &c : by_class) {
      if (!c.empty())
        nb = std::min(nb, c.size());
      std::shuffle(c.begin(), c.end(), rng);
      order.insert(order.end(), c.begin(), c.end());
    }
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::vector<std::size_t>> batches(nb);
  if (stratify) {
    // Deal round-robin so each class spreads evenly over the batches.
    for (std::size_t k = 0; k < order.size(); ++k)
      batches[k % nb].push_back(order[k]);
    std::shuffle(batches.begin(), batches.end(), rng);
  } else {
    for (std::size_t k = 0; k < order.size(); ++k)
      batches[k / bs].push_back(order[k]);
  }
  return batches;
}

namespace {

// Uniform view over the one or two branches of a model.
struct BranchRef {
  MlpModel *net;
  const BranchInputSpec *spec;
};

std::vector<BranchRef> branches_of(SasvModel &model) {
  return std::visit(
      [](auto &m) -> std::vector<BranchRef> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, SingleModel>)
          return {{&m.net, &m.spec}};
        else
          return {{&m.branch1, &m.spec1}, {&m.branch2, &m.spec2}};
      },
      model);
}

// Row-major feature matrix for one branch.
struct FeatureMatrix {
  std::size_t dim = 0;
  std::vector<double> data;
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

FeatureMatrix build_features(const std::vector<Trial> &trials, const BranchInputSpec &spec,
                             const EmbeddingStores &stores, std::size_t expected_dim) {
  FeatureMatrix fm;
  fm.dim = expected_dim;
  fm.data.reserve(trials.size() * expected_dim);
  std::vector<double> x;
  for (const auto &t : trials) {
    concat_features(t, spec, stores, x);
    if (x.size() != expected_dim)
      throw Error("trial '" + t.enroll_id + " " + t.test_id + "' yields " +
                  std::to_string(x.size()) + " features, model expects " +
                  std::to_string(expected_dim));
    fm.data.insert(fm.data.end(), x.begin(), x.end());
  }
  return fm;
}

std::vector<TrialLabel> training_labels(const std::vector<Trial> &trials, TrainTarget target) {
  std::vector<TrialLabel> out;
  out.reserve(trials.size());
  for (const auto &t : trials) {
    if (!t.label)
      throw Error("trial '" + t.enroll_id + " " + t.test_id + "' is unlabeled");
    TrialLabel l = *t.label;
    if (target == TrainTarget::Cm)
      l = cm_positive(l) ? TrialLabel::Target : TrialLabel::Spoof;
    out.push_back(l);
  }
  return out;
}

LossOutput compute_loss(LossMode mode, std::span<const double> scores,
                        std::span<const TrialLabel> labels, double tau,
                        const SoftAdcfConfig &cfg) {
  switch (mode) {
  case LossMode::Adcf:
    return soft_adcf_loss(scores, labels, tau, cfg);
  case LossMode::Bce:
    return bce_loss(scores, sasv_targets(labels));
  case LossMode::Combined:
    return combined_loss(scores, labels, tau, cfg);
  }
  throw Error("unknown loss mode");
}

class Session {
public:
  Session(SasvModel &model, const std::vector<Trial> &train, const std::vector<Trial> &dev,
          const EmbeddingStores &stores, const TrainConfig &cfg)
      : cfg_(cfg), branches_(branches_of(model)) {
    train_labels_ = training_labels(train, cfg.target);
    dev_labels_ = training_labels(dev, cfg.target);
    for (const auto &b : branches_) {
      train_x_.push_back(build_features(train, *b.spec, stores, b.net->input_dim()));
      dev_x_.push_back(build_features(dev, *b.spec, stores, b.net->input_dim()));
      grads_.push_back(MlpGrad::zeros_like(*b.net));
    }
    std::vector<std::size_t> sizes;
    for (const auto &b : branches_)
      for (const auto &l : b.net->layers()) {
        sizes.push_back(l.weights.size());
        sizes.push_back(l.bias.size());
      }
    sizes.push_back(1); // tau
    optimizer_.emplace(cfg.optimizer, std::move(sizes));
  }

  std::size_t train_size() const { return train_labels_.size(); }
  std::span<const TrialLabel> train_labels() const { return train_labels_; }

  std::vector<double> score_all(const std::vector<FeatureMatrix> &x, std::size_t n) const {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t b = 0; b < branches_.size(); ++b)
        sum += forward(*branches_[b].net, x[b].row(i));
      s[i] = sum / static_cast<double>(branches_.size());
    }
    return s;
  }

  double full_train_loss(double tau) const {
    const auto s = score_all(train_x_, train_size());
    return compute_loss(cfg_.loss_mode, s, train_labels_, tau, cfg_.soft_adcf).value;
  }

  AdcfMinimum dev_min() const {
    LabeledScores ls{score_all(dev_x_, dev_labels_.size()), dev_labels_};
    return min_adcf(ls, cfg_.eval_cost, cfg_.eval_normalize);
  }

  // One optimizer step on the batch; returns the batch loss.
  double step(const std::vector<std::size_t> &batch, double &tau, bool independent, int epoch,
              std::size_t batch_no) {
    const std::size_t nb = branches_.size();
    const std::size_t m = batch.size();
    caches_.resize(nb * m);
    std::vector<double> scores(m);
    std::vector<std::vector<double>> branch_scores(nb, std::vector<double>(m));
    std::vector<TrialLabel> labels(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = batch[k];
      labels[k] = train_labels_[i];
      double sum = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        const double p = forward(*branches_[b].net, train_x_[b].row(i), &caches_[b * m + k]);
        branch_scores[b][k] = p;
        sum += p;
      }
      scores[k] = sum / static_cast<double>(nb);
    }

    for (auto &g : grads_)
      g.set_zero();
    double value = 0.0;
    double grad_tau = 0.0;
    if (independent) {
      const auto targets = sasv_targets(labels);
      for (std::size_t b = 0; b < nb; ++b) {
        const LossOutput lo = bce_loss(branch_scores[b], targets);
        check_finite(lo.value, epoch, batch_no);
        value += lo.value / static_cast<double>(nb);
        for (std::size_t k = 0; k < m; ++k)
          backward(*branches_[b].net, caches_[b * m + k], lo.grad_scores[k], grads_[b]);
      }
    } else {
      const LossOutput lo = compute_loss(cfg_.loss_mode, scores, labels, tau, cfg_.soft_adcf);
      check_finite(lo.value, epoch, batch_no);
      value = lo.value;
      grad_tau = lo.grad_tau;
      const double share = 1.0 / static_cast<double>(nb);
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t k = 0; k < m; ++k)
          backward(*branches_[b].net, caches_[b * m + k], lo.grad_scores[k] * share, grads_[b]);
    }
    apply(tau, grad_tau);
    return value;
  }

private:
  static void check_finite(double v, int epoch, std::size_t batch_no) {
    if (!std::isfinite(v))
      throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                  ", batch " + std::to_string(batch_no));
  }

  void apply(double &tau, double grad_tau) {
    std::vector<std::span<double>> params;
    std::vector<std::span<const double>> grads;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      auto &layers = branches_[b].net->mutable_layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        params.emplace_back(layers[l].weights);
        params.emplace_back(layers[l].bias);
        grads.emplace_back(grads_[b].layers[l].weights);
        grads.emplace_back(grads_[b].layers[l].bias);
      }
    }
    const bool tau_live = cfg_.soft_adcf.tau_trainable && cfg_.loss_mode != LossMode::Bce;
    double gt = tau_live ? grad_tau : 0.0;
    double tau_copy = tau;
    params.emplace_back(&tau_copy, 1);
    grads.emplace_back(&gt, 1);
    optimizer_->step(params, grads);
    if (tau_live)
      tau = tau_copy;
  }

  const TrainConfig &cfg_;
  std::vector<BranchRef> branches_;
  std::vector<TrialLabel> train_labels_;
  std::vector<TrialLabel> dev_labels_;
  std::vector<FeatureMatrix> train_x_;
  std::vector<FeatureMatrix> dev_x_;
  std::vector<MlpGrad> grads_;
  std::vector<MlpCache> caches_;
  std::optional<Optimizer> optimizer_;
};

void log_epoch(std::ostream *log, const EpochRecord &r) {
  if (log == nullptr)
    return;
  *log << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.dev_min_adcf)
       << ',' << format_double(r.dev_argmin_tau) << '\n';
  log->flush();
}

} // namespace

TrainResult train(Checkpoint init, const std::vector<Trial> &train_trials,
                  const std::vector<Trial> &dev_trials, const EmbeddingStores &stores,
                  const TrainConfig &cfg, const TrainOutputs &outputs) {
  cfg.validate();
  std::visit([](const auto &m) { m.validate(); }, init.model);
  if (train_trials.empty())
    throw Error("train: no training trials");
  if (dev_trials.empty())
    throw Error("train: no development trials");
  const bool parallel = std::holds_alternative<ParallelModel>(init.model);
  if (cfg.pretrain_epochs > 0 && !parallel)
    throw Error("train: pretrain_epochs requires the parallel architecture");

  TrainResult result;
  SasvModel &model = init.model;
  double tau = init.tau;
  Session session(model, train_trials, dev_trials, stores, cfg);

  auto checkpoint_now = [&] { return Checkpoint{model, tau}; };
  auto record = [&](int epoch) {
    const AdcfMinimum dev = session.dev_min();
    EpochRecord r{epoch, session.full_train_loss(tau), dev.value, dev.threshold};
    result.report.epochs.push_back(r);
    log_epoch(outputs.log, r);
    return r;
  };

  const EpochRecord initial = record(0);
  result.best = checkpoint_now();
  result.report.best_epoch = 0;
  result.report.best_dev_adcf = initial.dev_min_adcf;
  result.report.best_dev_tau = initial.dev_argmin_tau;
  if (outputs.checkpoint) {
    write_checkpoint(*outputs.checkpoint, result.best);
    result.report.checkpoint = outputs.checkpoint;
  }

  // Which classes should appear in every stratified batch.
  std::array<bool, kNumClasses> present{};
  for (TrialLabel l : session.train_labels())
    present[class_index(l)] = true;

  std::mt19937_64 epoch_seeds(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  int stale = 0;
  const int total_epochs = cfg.pretrain_epochs + cfg.max_epochs;
  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    const bool independent = epoch <= cfg.pretrain_epochs;
    const auto batches =
        make_batches(session.train_labels(), cfg.batch_size, cfg.stratify_batches, epoch_seeds());
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::array<bool, kNumClasses> seen{};
      for (std::size_t i : batches[b])
        seen[class_index(session.train_labels()[i])] = true;
      if (seen != present)
        ++result.report.batches_missing_class;
      ++result.report.batches;
      session.step(batches[b], tau, independent, epoch, b + 1);
    }

    const EpochRecord r = record(epoch);
    if (r.dev_min_adcf < result.report.best_dev_adcf) {
      result.report.best_dev_adcf = r.dev_min_adcf;
      result.report.best_dev_tau = r.dev_argmin_tau;
      result.report.best_epoch = epoch;
      result.best = checkpoint_now();
      if (outputs.checkpoint)
        write_checkpoint(*outputs.checkpoint, result.best);
      stale = 0;
    } else if (!independent && cfg.early_stop_patience > 0 &&
               ++stale >= cfg.early_stop_patience) {
      result.report.early_stopped = true;
      break;
    }
  }
  result.report.final_tau = tau;
  result.last = checkpoint_now();
  return result;
}

std::vector<ScoreRecord> score_trials(const SasvModel &model, const std::vector<Trial> &trials,
                                      const EmbeddingStores &stores) {
  std::vector<ScoreRecord> out;
  out.reserve(trials.size());
  for (const auto &t : trials)
    out.push_back({t, score_trial(model, t, stores)});
  return out;
}

Evaluation evaluate(const SasvModel &model, const std::vector<Trial> &trials,
                    const EmbeddingStores &stores, const CostModel &cost, bool normalize) {
  if (trials.empty())
    throw Error("evaluate: no trials");
  Evaluation ev;
  ev.scores = score_trials(model, trials, stores);
  const LabeledScores ls = labeled_scores(ev.scores);
  ev.class_counts = ls.class_counts();
  ev.min = min_adcf(ls, cost, normalize);
  return ev;
}

} // namespace sasv
