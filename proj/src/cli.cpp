#include "sasv/cli.hpp"

#include "sasv/checkpoint.hpp"
#include "sasv/config.hpp"
#include "sasv/data.hpp"
#include "sasv/format.hpp"
#include "sasv/kernels.hpp"
#include "sasv/metrics.hpp"
#include "sasv/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

namespace sasv {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

json resolve_document(const CommonOptions &common,
                      const std::vector<std::pair<std::string, std::string>> &flag_overrides) {
  json doc = default_config_json();
  if (!common.config_path.empty()) {
    if (!fs::is_regular_file(common.config_path))
      throw Error("config file '" + common.config_path + "' does not exist");
    merge_config(doc, load_config_file(common.config_path));
  }
  for (const auto &o : common.overrides)
    apply_override(doc, o);
  for (const auto &[key, value] : flag_overrides)
    if (!value.empty())
      apply_override(doc, key + "=" + json(value).dump());
  if (common.seed)
    doc["seed"] = *common.seed;
  return doc;
}

std::uint64_t require_seed(const RunConfig &cfg, std::string_view command) {
  if (!cfg.seed)
    throw Error(std::string(command) +
                " is stochastic: pass --seed or set `seed` in the config file");
  return *cfg.seed;
}

void require_file(const std::string &path, std::string_view what) {
  if (path.empty())
    throw Error(std::string(what) + " path is required");
  if (!fs::is_regular_file(path))
    throw Error(std::string(what) + " '" + path + "' does not exist");
}

void ensure_parent(const fs::path &p) {
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
}

void write_json(const fs::path &p, const json &doc) {
  ensure_parent(p);
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f)
    throw Error("cannot open '" + p.string() + "' for writing");
  f << doc.dump(2) << '\n';
  if (!f)
    throw Error("write failed for '" + p.string() + "'");
}

fs::path sibling(const fs::path &p, std::string_view suffix) {
  return fs::path(p.string() + std::string(suffix));
}

json rates_json(const DetectionRates &r) {
  return {{"p_miss_tar", r.p_miss_tar}, {"p_fa_non", r.p_fa_non}, {"p_fa_spf", r.p_fa_spf}};
}

json metrics_report(const std::vector<ScoreRecord> &records, const RunConfig &cfg) {
  json rep;
  rep["trials"] = records.size();
  const bool labeled = std::all_of(records.begin(), records.end(),
                                   [](const ScoreRecord &r) { return r.trial.label.has_value(); });
  if (!labeled) {
    rep["labeled"] = false;
    return rep;
  }
  const LabeledScores ls = labeled_scores(records);
  const auto counts = ls.class_counts();
  const AdcfMinimum m = min_adcf(ls, cfg.cost, cfg.normalize);
  rep["labeled"] = true;
  rep["counts"] = {{"target", counts[0]}, {"nontarget", counts[1]}, {"spoof", counts[2]}};
  rep["min_adcf"] = m.value;
  rep["argmin_tau"] = m.threshold;
  rep["normalized"] = cfg.normalize;
  rep["rates_at_min"] = rates_json(m.rates);
  return rep;
}

void print_summary(std::ostream &out, std::string_view what, const json &rep) {
  if (rep.value("labeled", false))
    out << what << ": min a-DCF " << format_double(rep["min_adcf"].get<double>()) << " at tau "
        << format_double(rep["argmin_tau"].get<double>()) << " over " << rep["trials"].get<std::size_t>()
        << " trials\n";
  else
    out << what << ": scored " << rep["trials"].get<std::size_t>() << " unlabeled trials\n";
}

struct LoadedStores {
  std::optional<EmbeddingStore> asv;
  std::optional<EmbeddingStore> cm;
  EmbeddingStores view() const {
    return {asv ? &*asv : nullptr, cm ? &*cm : nullptr};
  }
};

LoadedStores load_stores(const DataPaths &d, bool need_asv) {
  LoadedStores s;
  if (need_asv || !d.asv_store.empty()) {
    require_file(d.asv_store, "ASV embedding store");
    s.asv = read_embeddings(fs::path(d.asv_store), StoreRole::Asv);
  }
  if (!d.cm_store.empty()) {
    require_file(d.cm_store, "CM embedding store");
    s.cm = read_embeddings(fs::path(d.cm_store), StoreRole::Cm);
  }
  return s;
}

// --------------------------------------------------------------------------

int cmd_gen_synth(const RunConfig &cfg, std::ostream &out) {
  if (cfg.output_dir.empty())
    throw Error("gen-synth needs an output directory (--out)");
  RunConfig resolved = cfg;
  resolved.synth.seed = require_seed(cfg, "gen-synth");
  const SynthData data = generate_synthetic(resolved.synth);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_embeddings(dir / "asv.emb", data.asv);
  write_embeddings(dir / "cm.emb", data.cm);
  write_trials(dir / "train.trials", data.train_trials);
  write_trials(dir / "dev.trials", data.dev_trials);
  const json full = to_json(resolved);
  write_json(dir / "manifest.json", json{{"seed", full["seed"]}, {"synth", full["synth"]}});
  out << "gen-synth: " << data.train_trials.size() << " train / " << data.dev_trials.size()
      << " dev trials written to " << dir.string() << '\n';
  return 0;
}

int cmd_score_fusion(const RunConfig &cfg, const std::string &trials_path,
                     const std::string &cm_scores_path, const std::string &cm_model_path,
                     const std::string &out_path, std::ostream &out) {
  require_file(trials_path, "trial list");
  if (cm_scores_path.empty() == cm_model_path.empty())
    throw Error("score-fusion needs exactly one of --cm-scores or --cm-model");
  if (!cm_scores_path.empty())
    require_file(cm_scores_path, "CM score file");
  else
    require_file(cm_model_path, "CM model checkpoint");
  if (out_path.empty())
    throw Error("score-fusion needs --out");

  const LoadedStores stores = load_stores(cfg.data, true);
  const auto trials = read_trials(fs::path(trials_path));
  if (trials.empty())
    throw Error("trial list '" + trials_path + "' is empty");

  std::vector<double> p_cm(trials.size());
  if (!cm_scores_path.empty()) {
    std::map<std::pair<std::string, std::string>, double> by_key;
    for (const auto &r : read_scores(fs::path(cm_scores_path)))
      by_key[{r.trial.enroll_id, r.trial.test_id}] = r.score;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      auto it = by_key.find({trials[i].enroll_id, trials[i].test_id});
      if (it == by_key.end())
        throw Error("no CM score for trial '" + trials[i].enroll_id + " " + trials[i].test_id + "'");
      p_cm[i] = it->second;
    }
  } else {
    const Checkpoint cm = read_checkpoint(fs::path(cm_model_path));
    for (std::size_t i = 0; i < trials.size(); ++i)
      p_cm[i] = score_trial(cm.model, trials[i], stores.view());
  }

  std::vector<ScoreRecord> records;
  records.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto &t = trials[i];
    const double p_asv = asv_probability(stores.asv->at(t.enroll_id), stores.asv->at(t.test_id));
    records.push_back({t, fuse_scores(p_asv, p_cm[i])});
  }
  const fs::path outp(out_path);
  ensure_parent(outp);
  write_scores(outp, records);
  const json rep = metrics_report(records, cfg);
  write_json(sibling(outp, ".report.json"), rep);
  write_json(sibling(outp, ".config.json"), to_json(cfg));
  print_summary(out, "score-fusion", rep);
  return 0;
}

int cmd_train(const RunConfig &cfg, std::ostream &out, std::ostream &err) {
  const std::uint64_t seed = require_seed(cfg, "train");
  if (cfg.output_dir.empty())
    throw Error("train needs an output directory (--out or output_dir)");
  require_file(cfg.data.train_trials, "training trial list");
  require_file(cfg.data.dev_trials, "development trial list");
  if (!cfg.init_checkpoint.empty())
    require_file(cfg.init_checkpoint, "initial checkpoint");

  const LoadedStores stores = load_stores(cfg.data, true);
  const auto train_trials = read_trials(fs::path(cfg.data.train_trials));
  const auto dev_trials = read_trials(fs::path(cfg.data.dev_trials));

  Checkpoint init;
  if (!cfg.init_checkpoint.empty())
    init = read_checkpoint(fs::path(cfg.init_checkpoint));
  else
    init = Checkpoint{build_model(cfg.model, stores.view(), seed), cfg.train.soft_adcf.tau_init};

  TrainConfig tc = cfg.train;
  tc.seed = seed;

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_json(dir / "config.json", to_json(cfg));
  std::ofstream log(dir / "train.log", std::ios::binary | std::ios::trunc);
  if (!log)
    throw Error("cannot open training log in '" + dir.string() + "'");
  log << "epoch,train_loss,dev_min_adcf,dev_argmin_tau\n";

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult res =
      train(std::move(init), train_trials, dev_trials, stores.view(), tc, {dir / "model.ckpt", &log});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_checkpoint(dir / "last.ckpt", res.last);
  const Evaluation dev = evaluate(res.best.model, dev_trials, stores.view(), cfg.cost, cfg.normalize);
  write_scores(dir / "dev_scores.txt", dev.scores);

  json rep;
  rep["epochs"] = json::array();
  for (const auto &e : res.report.epochs)
    rep["epochs"].push_back({{"epoch", e.epoch},
                             {"train_loss", e.train_loss},
                             {"dev_min_adcf", e.dev_min_adcf},
                             {"dev_argmin_tau", e.dev_argmin_tau}});
  rep["best_epoch"] = res.report.best_epoch;
  rep["best_dev_adcf"] = res.report.best_dev_adcf;
  rep["best_dev_tau"] = res.report.best_dev_tau;
  rep["final_tau"] = res.report.final_tau;
  rep["early_stopped"] = res.report.early_stopped;
  rep["batches"] = res.report.batches;
  rep["batches_missing_class"] = res.report.batches_missing_class;
  rep["checkpoint"] = "model.ckpt";
  write_json(dir / "report.json", rep);

  out << "train: best dev min a-DCF " << format_double(res.report.best_dev_adcf) << " at epoch "
      << res.report.best_epoch << " (" << res.report.epochs.size() - 1 << " epochs run)\n";
  err << "train: " << kernels::active().name << " kernels, " << secs << " s\n";
  return 0;
}

int cmd_eval(const RunConfig &cfg, const std::string &ckpt_path, const std::string &trials_path,
             const std::string &out_path, std::ostream &out) {
  require_file(ckpt_path, "checkpoint");
  require_file(trials_path, "trial list");
  if (out_path.empty())
    throw Error("eval needs --out");
  const LoadedStores stores = load_stores(cfg.data, false);
  const Checkpoint ckpt = read_checkpoint(fs::path(ckpt_path));
  const auto trials = read_trials(fs::path(trials_path));
  if (trials.empty())
    throw Error("trial list '" + trials_path + "' is empty");
  const auto records = score_trials(ckpt.model, trials, stores.view());
  const fs::path outp(out_path);
  ensure_parent(outp);
  write_scores(outp, records);
  const json rep = metrics_report(records, cfg);
  write_json(sibling(outp, ".report.json"), rep);
  write_json(sibling(outp, ".config.json"), to_json(cfg));
  print_summary(out, "eval", rep);
  return 0;
}

std::string trial_key(const Trial &t) { return t.enroll_id + " " + t.test_id; }

int cmd_fuse(const RunConfig &cfg, const std::string &a_path, const std::string &b_path,
             const std::string &trials_path, const std::string &out_path, std::ostream &out) {
  require_file(a_path, "score file");
  require_file(b_path, "score file");
  if (!trials_path.empty())
    require_file(trials_path, "trial list");
  if (out_path.empty())
    throw Error("fuse needs --out");
  const auto a = read_scores(fs::path(a_path));
  const auto b = read_scores(fs::path(b_path));

  std::map<std::string, double> b_by_key;
  for (const auto &r : b)
    if (!b_by_key.emplace(trial_key(r.trial), r.score).second)
      throw Error("duplicate trial '" + trial_key(r.trial) + "' in " + b_path);
  std::set<std::string> a_keys;
  for (const auto &r : a)
    if (!a_keys.insert(trial_key(r.trial)).second)
      throw Error("duplicate trial '" + trial_key(r.trial) + "' in " + a_path);

  std::vector<std::string> diff;
  for (const auto &k : a_keys)
    if (!b_by_key.contains(k))
      diff.push_back(k + " (only in " + a_path + ")");
  for (const auto &[k, v] : b_by_key)
    if (!a_keys.contains(k))
      diff.push_back(k + " (only in " + b_path + ")");
  if (!diff.empty()) {
    std::string msg = "score files cover different trial sets (" + std::to_string(diff.size()) +
                      " differences):";
    for (std::size_t i = 0; i < diff.size() && i < 10; ++i)
      msg += "\n  " + diff[i];
    throw Error(msg);
  }

  std::vector<ScoreRecord> fused;
  fused.reserve(a.size());
  for (const auto &r : a)
    fused.push_back({r.trial, (r.score + b_by_key.at(trial_key(r.trial))) / 2.0});
  if (!trials_path.empty())
    fused = attach_labels(fused, read_trials(fs::path(trials_path)));

  const fs::path outp(out_path);
  ensure_parent(outp);
  write_scores(outp, fused);
  const json rep = metrics_report(fused, cfg);
  write_json(sibling(outp, ".report.json"), rep);
  write_json(sibling(outp, ".config.json"), to_json(cfg));
  print_summary(out, "fuse", rep);
  return 0;
}

int cmd_histogram(const std::string &scores_path, const std::string &trials_path,
                  std::size_t bins, const std::string &out_path, std::ostream &out) {
  require_file(scores_path, "score file");
  require_file(trials_path, "trial list");
  if (out_path.empty())
    throw Error("histogram needs --out");
  const auto trials = read_trials(fs::path(trials_path));
  for (const auto &t : trials)
    if (!t.label)
      throw Error("histogram needs labeled trials; '" + trial_key(t) + "' has no label");
  const auto records = attach_labels(read_scores(fs::path(scores_path)), trials);
  const ScoreHistogram h = score_histogram(labeled_scores(records), bins);
  const fs::path outp(out_path);
  ensure_parent(outp);
  std::ofstream f(outp, std::ios::binary | std::ios::trunc);
  if (!f)
    throw Error("cannot open '" + out_path + "' for writing");
  write_histogram_csv(f, h);
  if (!f)
    throw Error("write failed for '" + out_path + "'");
  out << "histogram: " << bins << " bins over " << records.size() << " trials\n";
  return 0;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Spoofing-aware speaker verification fusion toolkit", "sasv"};
  app.set_version_flag("--version", std::string("sasv ") + SASV_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  CommonOptions common;
  app.add_option("--config", common.config_path, "JSON run configuration");
  app.add_option("--set", common.overrides, "Override a config key: key.path=value")
      ->expected(1)
      ->take_all();
  std::uint64_t seed_value = 0;
  auto *seed_opt =
      app.add_option("--seed", seed_value, "Seed for stochastic commands (overrides config)");

  std::string out_path, trials_path, asv_store, cm_store, cm_scores, cm_model, checkpoint,
      scores_path, train_trials, dev_trials;
  std::vector<std::string> fuse_inputs;
  std::size_t bins = 50;

  auto *gen = app.add_subcommand("gen-synth", "Generate a synthetic embedding corpus");
  gen->add_option("--out", out_path, "Output directory");

  auto *sf = app.add_subcommand("score-fusion", "Cosine ASV + CM probability score fusion");
  sf->add_option("--asv-store", asv_store, "ASV embedding file");
  sf->add_option("--cm-store", cm_store, "CM embedding file (for --cm-model)");
  sf->add_option("--cm-scores", cm_scores, "Per-trial CM probabilities (score file)");
  sf->add_option("--cm-model", cm_model, "CM-head checkpoint");
  sf->add_option("--trials", trials_path, "Trial list")->required();
  sf->add_option("--out", out_path, "Output score file")->required();

  auto *tr = app.add_subcommand("train", "Train a single or parallel fusion network");
  tr->add_option("--out", out_path, "Output directory (overrides output_dir)");
  tr->add_option("--asv-store", asv_store, "ASV embedding file");
  tr->add_option("--cm-store", cm_store, "CM embedding file");
  tr->add_option("--train-trials", train_trials, "Labeled training trial list");
  tr->add_option("--dev-trials", dev_trials, "Labeled development trial list");

  auto *ev = app.add_subcommand("eval", "Score trials with a checkpoint");
  ev->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  ev->add_option("--trials", trials_path, "Trial list")->required();
  ev->add_option("--asv-store", asv_store, "ASV embedding file");
  ev->add_option("--cm-store", cm_store, "CM embedding file");
  ev->add_option("--out", out_path, "Output score file")->required();

  auto *fu = app.add_subcommand("fuse", "Average two score files over the same trials");
  fu->add_option("inputs", fuse_inputs, "Two score files")->expected(2)->required();
  fu->add_option("--trials", trials_path, "Labeled trial list (enables the a-DCF report)");
  fu->add_option("--out", out_path, "Output score file")->required();

  auto *hi = app.add_subcommand("histogram", "Per-class score histogram as CSV");
  hi->add_option("--scores", scores_path, "Score file")->required();
  hi->add_option("--trials", trials_path, "Labeled trial list")->required();
  hi->add_option("--bins", bins, "Number of uniform bins over [0,1]")->check(CLI::Range(2, 1000000));
  hi->add_option("--out", out_path, "Output CSV")->required();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("sasv");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &s : argv_store)
    argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion &e) {
    out << e.what() << '\n';
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "sasv: " << e.what() << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  if (seed_opt->count() > 0)
    common.seed = seed_value;

  try {
    std::vector<std::pair<std::string, std::string>> flags{{"data.asv_store", asv_store},
                                                          {"data.cm_store", cm_store},
                                                          {"data.train_trials", train_trials},
                                                          {"data.dev_trials", dev_trials}};
    if (gen->parsed() || tr->parsed())
      flags.emplace_back("output_dir", out_path);
    const RunConfig cfg = parse_config(resolve_document(common, flags));

    if (gen->parsed())
      return cmd_gen_synth(cfg, out);
    if (sf->parsed())
      return cmd_score_fusion(cfg, trials_path, cm_scores, cm_model, out_path, out);
    if (tr->parsed())
      return cmd_train(cfg, out, err);
    if (ev->parsed())
      return cmd_eval(cfg, checkpoint, trials_path, out_path, out);
    if (fu->parsed())
      return cmd_fuse(cfg, fuse_inputs[0], fuse_inputs[1], trials_path, out_path, out);
    if (hi->parsed())
      return cmd_histogram(scores_path, trials_path, bins, out_path, out);
  } catch (const Error &e) {
    err << "sasv: error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception &e) {
    err << "sasv: config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    err << "sasv: " << e.what() << '\n';
    return 1;
  }
  err << "sasv: no subcommand\n";
  return 2;
}

} // namespace sasv
