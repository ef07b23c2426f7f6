#include "scda/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "scda/error.hpp"

namespace scda {

namespace {

void accumulate(double value, double& sum, double& sum_sq) {
  sum += value;
  sum_sq += value * value;
}

double sample_sd(double sum, double sum_sq, int n) {
  if (n < 2) return 0.0;
  const double mean = sum / n;
  const double var = (sum_sq - n * mean * mean) / (n - 1);
  return std::sqrt(std::max(0.0, var));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

AblationTable ablation_suite(const TrainConfig& cfg_base,
                             const ShiftSpec& bench,
                             std::span<const AblationMode> modes,
                             std::span<const std::uint64_t> seeds) {
  validate_config(cfg_base);
  if (modes.empty()) throw ContractViolation("ablation_suite: no modes");
  if (seeds.empty()) throw ContractViolation("ablation_suite: no seeds");
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t j = i + 1; j < modes.size(); ++j)
      if (modes[i] == modes[j])
        throw ContractViolation("ablation_suite: duplicate mode");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j])
        throw ContractViolation("ablation_suite: duplicate seed");

  AblationTable table;
  table.seeds.assign(seeds.begin(), seeds.end());
  for (AblationMode mode : modes) {
    double os_sum = 0.0, os_sq = 0.0;
    double star_sum = 0.0, star_sq = 0.0;
    double err_sum = 0.0, err_sq = 0.0;
    for (std::uint64_t seed : seeds) {
      Rng gen(seed);
      GeneratedPair pair = generate(bench, gen);

      TrainConfig cfg = cfg_base;
      cfg.seed = seed;
      cfg.ablation_mode = mode;
      if ((mode == AblationMode::KGtNoIters ||
           mode == AblationMode::KGtIters) &&
          cfg.k_gt < 1) {
        cfg.k_gt = bench.num_implicit;
      }

      AblationCell cell;
      cell.mode = mode;
      cell.seed = seed;
      cell.report = run(cfg, pair.source, pair.target).report;
      accumulate(cell.report.os, os_sum, os_sq);
      accumulate(cell.report.os_star, star_sum, star_sq);
      accumulate(cell.report.k_error, err_sum, err_sq);
      table.cells.push_back(std::move(cell));
    }

    AblationAggregate agg;
    agg.mode = mode;
    agg.runs = static_cast<int>(seeds.size());
    agg.os_mean = os_sum / agg.runs;
    agg.os_sd = sample_sd(os_sum, os_sq, agg.runs);
    agg.os_star_mean = star_sum / agg.runs;
    agg.os_star_sd = sample_sd(star_sum, star_sq, agg.runs);
    agg.k_error_mean = err_sum / agg.runs;
    agg.k_error_sd = sample_sd(err_sum, err_sq, agg.runs);
    table.rows.push_back(agg);
  }
  return table;
}

std::string ablation_csv(const AblationTable& table) {
  std::string out =
      "mode,runs,os_mean,os_sd,os_star_mean,os_star_sd,k_error_mean,"
      "k_error_sd\n";
  for (const AblationAggregate& row : table.rows) {
    out += ablation_name(row.mode);
    out += ',' + std::to_string(row.runs);
    out += ',' + format_double(row.os_mean);
    out += ',' + format_double(row.os_sd);
    out += ',' + format_double(row.os_star_mean);
    out += ',' + format_double(row.os_star_sd);
    out += ',' + format_double(row.k_error_mean);
    out += ',' + format_double(row.k_error_sd);
    out += '\n';
  }
  return out;
}

std::string ablation_to_string(const AblationTable& table) {
  nlohmann::ordered_json doc;
  doc["format"] = "scda-ablation";
  doc["version"] = 1;
  doc["seeds"] = table.seeds;
  doc["cells"] = nlohmann::ordered_json::array();
  for (const AblationCell& cell : table.cells) {
    nlohmann::ordered_json entry;
    entry["mode"] = ablation_name(cell.mode);
    entry["seed"] = cell.seed;
    entry["report"] = nlohmann::ordered_json::parse(report_to_string(cell.report));
    doc["cells"].push_back(std::move(entry));
  }
  doc["table"] = nlohmann::ordered_json::array();
  for (const AblationAggregate& row : table.rows) {
    nlohmann::ordered_json entry;
    entry["mode"] = ablation_name(row.mode);
    entry["runs"] = row.runs;
    entry["os_mean"] = row.os_mean;
    entry["os_sd"] = row.os_sd;
    entry["os_star_mean"] = row.os_star_mean;
    entry["os_star_sd"] = row.os_star_sd;
    entry["k_error_mean"] = row.k_error_mean;
    entry["k_error_sd"] = row.k_error_sd;
    doc["table"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

void save_ablation(const std::string& csv_path, const std::string& json_path,
                   const AblationTable& table) {
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + csv_path);
    out << ablation_csv(table);
    if (!out.flush()) throw IoError("write failed: " + csv_path);
  }
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + json_path);
  out << ablation_to_string(table);
  if (!out.flush()) throw IoError("write failed: " + json_path);
}

}  // namespace scda
