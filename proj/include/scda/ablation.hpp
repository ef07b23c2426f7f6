#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scda/adapter.hpp"
#include "scda/data.hpp"
#include "scda/eval.hpp"

namespace scda {

/// One (mode, seed) run of the suite. The benchmark pair and the training
/// stream both derive from `seed`, so every cell is an independent draw.
struct AblationCell {
  AblationMode mode = AblationMode::Full;
  std::uint64_t seed = 0;
  MetricsReport report;
};

/// Per-mode aggregate over the seeds. Deviations are sample standard
/// deviations (n - 1 denominator), 0 for a single run.
struct AblationAggregate {
  AblationMode mode = AblationMode::Full;
  int runs = 0;
  double os_mean = 0.0;
  double os_sd = 0.0;
  double os_star_mean = 0.0;
  double os_star_sd = 0.0;
  double k_error_mean = 0.0;
  double k_error_sd = 0.0;
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;  // mode-major, seed-minor
  std::vector<AblationAggregate> rows;
};

/// Runs every requested mode on every seed: per cell the benchmark is
/// generated with Rng(seed), then adapter.run executes with cfg_base,
/// cfg.seed = seed and cfg.ablation_mode = mode. The k_gt_* modes receive
/// bench.num_implicit as their oracle count unless cfg_base.k_gt is
/// already positive. Modes and seeds must be non-empty and unique.
AblationTable ablation_suite(const TrainConfig& cfg_base,
                             const ShiftSpec& bench,
                             std::span<const AblationMode> modes,
                             std::span<const std::uint64_t> seeds);

/// Comparison table, one row per mode:
/// mode,runs,os_mean,os_sd,os_star_mean,os_star_sd,k_error_mean,k_error_sd
std::string ablation_csv(const AblationTable& table);

/// Canonical JSON document {"format":"scda-ablation","version":1,...}
/// with the per-cell reports embedded; byte-deterministic.
std::string ablation_to_string(const AblationTable& table);

void save_ablation(const std::string& csv_path, const std::string& json_path,
                   const AblationTable& table);

}  // namespace scda
