#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "scda/adapter.hpp"
#include "scda/data.hpp"

namespace scda {

/// Output locations and optional dataset files. When both CSV paths are
/// set, `run` trains on them instead of generating the benchmark; for
/// `generate` they override the default output names.
struct CliPaths {
  std::string out_dir = "runs";
  std::string source_csv;
  std::string target_csv;
};

/// Ablation sweep selection: mode names per ablation_from_name, and
/// num_seeds consecutive seeds starting at train.seed.
struct AblateSpec {
  std::vector<std::string> modes = {"full", "pretrain_only", "k_fixed_1",
                                    "k_star_no_iters", "k_gt_iters"};
  int num_seeds = 10;
};

/// The full configuration document: {"train":{},"bench":{},"paths":{},
/// "ablate":{}}. Every leaf has a flag of the same name; flags override
/// file values, file values override defaults. Unknown keys are rejected.
struct CliConfig {
  TrainConfig train;
  ShiftSpec bench;
  CliPaths paths;
  AblateSpec ablate;
};

/// Canonical JSON form (fixed key order, used for hashing and for the
/// config.json artifact).
nlohmann::ordered_json config_to_json(const CliConfig& cfg);

/// Parses a document produced by config_to_json or written by hand;
/// missing keys keep their defaults, unknown keys or wrong types throw
/// ParseError. Top-level sections may be omitted.
CliConfig config_from_json(const nlohmann::ordered_json& doc);

CliConfig load_config(const std::string& path);
void save_config(const std::string& path, const CliConfig& cfg);

/// FNV-1a over the canonical bytes of {train, bench} with train.seed
/// zeroed: identifies the experiment, not the draw. 16 hex digits.
std::string config_hash(const CliConfig& cfg);

/// Validates both sub-configs (train via validate_config, bench via a dry
/// sanity pass mirroring the generator's preconditions).
void validate_cli_config(const CliConfig& cfg);

}  // namespace scda
