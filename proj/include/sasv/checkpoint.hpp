#pragma once

// Versioned text checkpoint holding either architecture plus the trained
// decision threshold. Parameters are written in shortest round-trip form, so
// write -> read -> write is byte-identical and values are bit-exact.

#include "sasv/network.hpp"

#include <filesystem>
#include <iosfwd>

namespace sasv {

inline constexpr std::string_view kCheckpointHeader = "#sasv-checkpoint:v1";

struct Checkpoint {
  SasvModel model;
  double tau = 0.5;

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

void write_checkpoint(std::ostream &os, const Checkpoint &ckpt);
void write_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint read_checkpoint(std::istream &is, std::string_view source = "<stream>");
Checkpoint read_checkpoint(const std::filesystem::path &path);

} // namespace sasv
