#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clhad/trainer.hpp"

namespace clhad {

// FNV-1a over a canonical string; stable across runs and platforms.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const TrainConfig& cfg);

TrainConfig train_config_from_json_file(const std::filesystem::path& path);
TrainConfig train_config_from_json_text(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);

// One manifest per CLI run; wall-clock is informational and deliberately
// kept out of every deterministic artifact.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version;
  double wall_clock_seconds = 0;
};

void save_run_manifest(const RunManifest& manifest, const std::filesystem::path& path);

inline const char* toolkit_version() { return "0.1.0"; }

}  // namespace clhad
