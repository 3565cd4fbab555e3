#include "sasv/config.hpp"

#include <fstream>

namespace sasv {

using nlohmann::json;

namespace {

json spec_to_json(const BranchInputSpec &s) {
  json a = json::array();
  for (auto src : s.sources)
    a.push_back(std::string(to_string(src)));
  return a;
}

BranchInputSpec spec_from_json(const json &a, const std::string &key) {
  BranchInputSpec s;
  for (const auto &v : a) {
    if (!v.is_string())
      throw Error("config: " + key + " entries must be strings");
    s.sources.push_back(parse_feature_source(v.get<std::string>()));
  }
  try {
    s.validate();
  } catch (const Error &e) {
    throw Error("config: " + key + ": " + e.what());
  }
  return s;
}

bool compatible(const json &def, const json &val) {
  if (def.is_null())
    return val.is_null() || val.is_number_integer() || val.is_number_unsigned();
  if (def.is_number_integer() || def.is_number_unsigned())
    return val.is_number_integer() || val.is_number_unsigned();
  if (def.is_number())
    return val.is_number();
  return def.type() == val.type();
}

void merge_at(json &base, const json &user, const std::string &prefix) {
  if (!user.is_object())
    throw Error("config: '" + (prefix.empty() ? std::string("<root>") : prefix) +
                "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key()))
      throw Error("config: unknown key '" + key + "'");
    json &slot = base[it.key()];
    if (slot.is_object()) {
      merge_at(slot, it.value(), key);
    } else {
      if (!compatible(slot, it.value()))
        throw Error("config: key '" + key + "' expects " + std::string(slot.type_name()) +
                    ", got " + std::string(it.value().type_name()));
      slot = it.value();
    }
  }
}

template <class T> T get(const json &doc, const char *section, const char *key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const json::exception &) {
    throw Error(std::string("config: invalid value for '") + section + "." + key + "'");
  }
}

std::optional<std::uint64_t> opt_u64(const json &v) {
  if (v.is_null())
    return std::nullopt;
  if (v.is_number_integer() && v.get<long long>() < 0)
    throw Error("config: seeds must be non-negative");
  return v.get<std::uint64_t>();
}

} // namespace

json default_config_json() {
  const ModelConfig model;
  const TrainConfig train;
  const CostModel cost;
  const SynthConfig synth;
  return json{
      {"seed", nullptr},
      {"output_dir", ""},
      {"data", {{"asv_store", ""}, {"cm_store", ""}, {"train_trials", ""}, {"dev_trials", ""}}},
      {"model",
       {{"architecture", "parallel"},
        {"hidden", json::array()},
        {"activation", "leaky_relu"},
        {"leaky_slope", model.activation.slope},
        {"input", spec_to_json(model.input)},
        {"branch1", spec_to_json(model.branch1)},
        {"branch2", spec_to_json(model.branch2)},
        {"init_seed1", nullptr},
        {"init_seed2", nullptr},
        {"zero_init", false},
        {"init_checkpoint", ""}}},
      {"train",
       {{"optimizer", "adam"},
        {"lr", train.optimizer.lr},
        {"momentum", train.optimizer.momentum},
        {"beta1", train.optimizer.beta1},
        {"beta2", train.optimizer.beta2},
        {"eps", train.optimizer.eps},
        {"batch_size", train.batch_size},
        {"max_epochs", train.max_epochs},
        {"loss", "combined"},
        {"target", "sasv"},
        {"stratify_batches", train.stratify_batches},
        {"early_stop_patience", train.early_stop_patience},
        {"pretrain_epochs", train.pretrain_epochs}}},
      {"soft_adcf",
       {{"alpha", train.soft_adcf.alpha},
        {"tau_trainable", train.soft_adcf.tau_trainable},
        {"tau_init", train.soft_adcf.tau_init},
        {"normalize", train.soft_adcf.normalize}}},
      {"cost",
       {{"c_miss_tar", cost.c_miss_tar},
        {"c_fa_non", cost.c_fa_non},
        {"c_fa_spf", cost.c_fa_spf},
        {"pi_tar", cost.pi_tar},
        {"pi_non", cost.pi_non},
        {"pi_spf", cost.pi_spf},
        {"normalize", true}}},
      {"synth",
       {{"n_speakers", synth.n_speakers},
        {"n_enroll_per_spk", synth.n_enroll_per_spk},
        {"n_bonafide_tests_per_spk", synth.n_bonafide_tests_per_spk},
        {"n_spoof_tests_per_spk", synth.n_spoof_tests_per_spk},
        {"asv_dim", synth.asv_dim},
        {"cm_dim", synth.cm_dim},
        {"speaker_spread", synth.speaker_spread},
        {"spoof_asv_fidelity", synth.spoof_asv_fidelity},
        {"cm_separation", synth.cm_separation}}},
  };
}

void merge_config(json &base, const json &user) { merge_at(base, user, ""); }

void apply_override(json &doc, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error("override '" + assignment + "' must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded())
    value = raw;

  // Build a nested object {a: {b: value}} and merge it, reusing key checks.
  json patch = value;
  std::size_t end = path.size();
  for (;;) {
    const auto dot = path.rfind('.', end - 1);
    const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
    const std::string key = path.substr(start, end - start);
    if (key.empty())
      throw Error("override '" + assignment + "' has an empty key segment");
    patch = json{{key, patch}};
    if (dot == std::string::npos)
      break;
    end = dot;
  }
  merge_config(doc, patch);
}

json load_config_file(const std::filesystem::path &path) {
  std::ifstream f(path);
  if (!f)
    throw Error("cannot open config '" + path.string() + "'");
  json doc = json::parse(f, nullptr, false);
  if (doc.is_discarded())
    throw Error("config '" + path.string() + "' is not valid JSON");
  return doc;
}

RunConfig parse_config(const json &doc) {
  RunConfig c;
  c.seed = opt_u64(doc.at("seed"));
  c.output_dir = doc.at("output_dir").get<std::string>();

  c.data.asv_store = get<std::string>(doc, "data", "asv_store");
  c.data.cm_store = get<std::string>(doc, "data", "cm_store");
  c.data.train_trials = get<std::string>(doc, "data", "train_trials");
  c.data.dev_trials = get<std::string>(doc, "data", "dev_trials");

  const json &m = doc.at("model");
  const auto arch = m.at("architecture").get<std::string>();
  if (arch == "single")
    c.model.architecture = Architecture::Single;
  else if (arch == "parallel")
    c.model.architecture = Architecture::Parallel;
  else
    throw Error("config: model.architecture must be single or parallel");
  for (const auto &h : m.at("hidden")) {
    if (!h.is_number_integer() || h.get<long long>() <= 0)
      throw Error("config: model.hidden must list positive integers");
    c.model.hidden.push_back(h.get<std::size_t>());
  }
  c.model.activation.kind = parse_activation(m.at("activation").get<std::string>());
  c.model.activation.slope = get<double>(doc, "model", "leaky_slope");
  c.model.input = spec_from_json(m.at("input"), "model.input");
  c.model.branch1 = spec_from_json(m.at("branch1"), "model.branch1");
  c.model.branch2 = spec_from_json(m.at("branch2"), "model.branch2");
  c.model.init_seed1 = opt_u64(m.at("init_seed1"));
  c.model.init_seed2 = opt_u64(m.at("init_seed2"));
  c.model.zero_init = get<bool>(doc, "model", "zero_init");
  c.init_checkpoint = get<std::string>(doc, "model", "init_checkpoint");

  const json &t = doc.at("train");
  const auto opt = t.at("optimizer").get<std::string>();
  if (opt == "adam")
    c.train.optimizer.kind = OptimizerKind::Adam;
  else if (opt == "sgd")
    c.train.optimizer.kind = OptimizerKind::Sgd;
  else
    throw Error("config: train.optimizer must be adam or sgd");
  c.train.optimizer.lr = get<double>(doc, "train", "lr");
  c.train.optimizer.momentum = get<double>(doc, "train", "momentum");
  c.train.optimizer.beta1 = get<double>(doc, "train", "beta1");
  c.train.optimizer.beta2 = get<double>(doc, "train", "beta2");
  c.train.optimizer.eps = get<double>(doc, "train", "eps");
  c.train.batch_size = get<int>(doc, "train", "batch_size");
  c.train.max_epochs = get<int>(doc, "train", "max_epochs");
  c.train.loss_mode = parse_loss_mode(t.at("loss").get<std::string>());
  const auto target = t.at("target").get<std::string>();
  if (target == "sasv")
    c.train.target = TrainTarget::Sasv;
  else if (target == "cm")
    c.train.target = TrainTarget::Cm;
  else
    throw Error("config: train.target must be sasv or cm");
  c.train.stratify_batches = get<bool>(doc, "train", "stratify_batches");
  c.train.early_stop_patience = get<int>(doc, "train", "early_stop_patience");
  c.train.pretrain_epochs = get<int>(doc, "train", "pretrain_epochs");

  c.cost.c_miss_tar = get<double>(doc, "cost", "c_miss_tar");
  c.cost.c_fa_non = get<double>(doc, "cost", "c_fa_non");
  c.cost.c_fa_spf = get<double>(doc, "cost", "c_fa_spf");
  c.cost.pi_tar = get<double>(doc, "cost", "pi_tar");
  c.cost.pi_non = get<double>(doc, "cost", "pi_non");
  c.cost.pi_spf = get<double>(doc, "cost", "pi_spf");
  c.normalize = get<bool>(doc, "cost", "normalize");
  c.cost.validate();

  c.train.soft_adcf.cost = c.cost;
  c.train.soft_adcf.alpha = get<double>(doc, "soft_adcf", "alpha");
  c.train.soft_adcf.tau_trainable = get<bool>(doc, "soft_adcf", "tau_trainable");
  c.train.soft_adcf.tau_init = get<double>(doc, "soft_adcf", "tau_init");
  c.train.soft_adcf.normalize = get<bool>(doc, "soft_adcf", "normalize");
  c.train.eval_cost = c.cost;
  c.train.eval_normalize = c.normalize;

  c.synth.n_speakers = get<int>(doc, "synth", "n_speakers");
  c.synth.n_enroll_per_spk = get<int>(doc, "synth", "n_enroll_per_spk");
  c.synth.n_bonafide_tests_per_spk = get<int>(doc, "synth", "n_bonafide_tests_per_spk");
  c.synth.n_spoof_tests_per_spk = get<int>(doc, "synth", "n_spoof_tests_per_spk");
  c.synth.asv_dim = get<int>(doc, "synth", "asv_dim");
  c.synth.cm_dim = get<int>(doc, "synth", "cm_dim");
  c.synth.speaker_spread = get<double>(doc, "synth", "speaker_spread");
  c.synth.spoof_asv_fidelity = get<double>(doc, "synth", "spoof_asv_fidelity");
  c.synth.cm_separation = get<double>(doc, "synth", "cm_separation");
  if (c.seed)
    c.synth.seed = *c.seed;
  return c;
}

json to_json(const RunConfig &c) {
  json doc = default_config_json();
  doc["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  doc["output_dir"] = c.output_dir;
  doc["data"] = {{"asv_store", c.data.asv_store},
                 {"cm_store", c.data.cm_store},
                 {"train_trials", c.data.train_trials},
                 {"dev_trials", c.data.dev_trials}};
  json &m = doc["model"];
  m["architecture"] = c.model.architecture == Architecture::Single ? "single" : "parallel";
  m["hidden"] = c.model.resolved_hidden();
  m["activation"] = std::string(to_string(c.model.activation.kind));
  m["leaky_slope"] = c.model.activation.slope;
  m["input"] = spec_to_json(c.model.input);
  m["branch1"] = spec_to_json(c.model.branch1);
  m["branch2"] = spec_to_json(c.model.branch2);
  m["init_seed1"] = c.model.init_seed1 ? json(*c.model.init_seed1) : json(nullptr);
  m["init_seed2"] = c.model.init_seed2 ? json(*c.model.init_seed2) : json(nullptr);
  m["zero_init"] = c.model.zero_init;
  m["init_checkpoint"] = c.init_checkpoint;
  json &t = doc["train"];
  t["optimizer"] = c.train.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd";
  t["lr"] = c.train.optimizer.lr;
  t["momentum"] = c.train.optimizer.momentum;
  t["beta1"] = c.train.optimizer.beta1;
  t["beta2"] = c.train.optimizer.beta2;
  t["eps"] = c.train.optimizer.eps;
  t["batch_size"] = c.train.batch_size;
  t["max_epochs"] = c.train.max_epochs;
  t["loss"] = std::string(to_string(c.train.loss_mode));
  t["target"] = c.train.target == TrainTarget::Cm ? "cm" : "sasv";
  t["stratify_batches"] = c.train.stratify_batches;
  t["early_stop_patience"] = c.train.early_stop_patience;
  t["pretrain_epochs"] = c.train.pretrain_epochs;
  doc["soft_adcf"] = {{"alpha", c.train.soft_adcf.alpha},
                      {"tau_trainable", c.train.soft_adcf.tau_trainable},
                      {"tau_init", c.train.soft_adcf.tau_init},
                      {"normalize", c.train.soft_adcf.normalize}};
  doc["cost"] = {{"c_miss_tar", c.cost.c_miss_tar}, {"c_fa_non", c.cost.c_fa_non},
                 {"c_fa_spf", c.cost.c_fa_spf},     {"pi_tar", c.cost.pi_tar},
                 {"pi_non", c.cost.pi_non},         {"pi_spf", c.cost.pi_spf},
                 {"normalize", c.normalize}};
  doc["synth"] = {{"n_speakers", c.synth.n_speakers},
                  {"n_enroll_per_spk", c.synth.n_enroll_per_spk},
                  {"n_bonafide_tests_per_spk", c.synth.n_bonafide_tests_per_spk},
                  {"n_spoof_tests_per_spk", c.synth.n_spoof_tests_per_spk},
                  {"asv_dim", c.synth.asv_dim},
                  {"cm_dim", c.synth.cm_dim},
                  {"speaker_spread", c.synth.speaker_spread},
                  {"spoof_asv_fidelity", c.synth.spoof_asv_fidelity},
                  {"cm_separation", c.synth.cm_separation}};
  return doc;
}

} // namespace sasv
