#pragma once

// Declarative run configuration. A JSON document is merged over the built-in
// defaults (unknown keys and type mismatches are rejected), then individual
// keys may be overridden with `key.path=value` assignments.

#include "sasv/data.hpp"
#include "sasv/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sasv {

struct DataPaths {
  std::string asv_store;
  std::string cm_store;
  std::string train_trials;
  std::string dev_trials;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  DataPaths data;
  ModelConfig model;
  std::string init_checkpoint;
  TrainConfig train;
  CostModel cost;
  bool normalize = true;
  SynthConfig synth;
};

nlohmann::json default_config_json();

/// Merges `user` into `base`; throws naming the offending key path.
void merge_config(nlohmann::json &base, const nlohmann::json &user);

/// `a.b.c=value`; value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json &doc, const std::string &assignment);

nlohmann::json load_config_file(const std::filesystem::path &path);

/// Typed view; validates enumerations and ranges.
RunConfig parse_config(const nlohmann::json &doc);

/// Inverse of parse_config for the fields it covers (fully resolved echo).
nlohmann::json to_json(const RunConfig &cfg);

} // namespace sasv
