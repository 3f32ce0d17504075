#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "instrans/datasets.hpp"
#include "instrans/training.hpp"

namespace instrans {

void to_json(nlohmann::json& j, const DomainPalette& p);
void from_json(const nlohmann::json& j, DomainPalette& p);
void to_json(nlohmann::json& j, const SyntheticSceneSpec& s);
void from_json(const nlohmann::json& j, SyntheticSceneSpec& s);

// The full option tree every command reads from. Layering: built-in defaults,
// then the config file, then --set overrides; later layers win key by key.
struct RunConfig {
  nlohmann::json tree;

  TrainConfig train_config() const;       // network + train + loss sections
  SyntheticSceneSpec synthetic_spec() const;
  std::string out_dir() const;
};

nlohmann::json default_run_config();

// Applies "dotted.path=value" assignments. Unknown paths and malformed
// assignments throw ConfigError; values parse as JSON scalars when possible
// and fall back to strings (string-typed keys always stay strings).
void apply_set_overrides(nlohmann::json& tree, const std::vector<std::string>& sets);

// defaults <- file (when non-empty) <- sets. Unknown file keys are rejected.
RunConfig resolve_run_config(const std::string& config_path, const std::vector<std::string>& sets);

// Loads both domains' samples per the dataset/synthetic sections.
std::array<std::vector<ImageSample>, 2> load_pools(const RunConfig& cfg);

// Trains every ablation variant (discriminator sharing, pairing flags) on one
// shared pool and returns the comparison report.
nlohmann::json run_ablation(const RunConfig& cfg, const std::string& out_dir);

int run_cli(int argc, char** argv);

}  // namespace instrans
