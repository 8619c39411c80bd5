#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "score/refiner.hpp"

namespace score {

// "SCKP" | u16 version | u32 n + config echo (key=value lines) |
// u32 tensor count | per tensor: u16 name length, name, u64 rows, u64 cols,
// f64 values | u64 Adam step | per tensor: f64 m, f64 v. Little-endian.
struct Checkpoint {
  Refiner net;
  // Extra key=value pairs stored next to the refiner config (prior settings,
  // ablation switches, training provenance).
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws IoError, or CheckpointError for malformed or inconsistent files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string refiner_config_echo(const RefinerConfig& cfg);

}  // namespace score
