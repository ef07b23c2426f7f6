#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scda/data.hpp"
#include "scda/net.hpp"

namespace scda {

/// Per-class accuracy over num_known + 1 rows (the last row pools every
/// implicit ground-truth class into one unknown class). Classes absent from
/// the target are excluded from the means; their per_class entry is -1 and
/// their id is listed in skipped_classes.
struct OsMetrics {
  double os = 0.0;
  double os_star = 0.0;
  std::vector<double> per_class;
  std::vector<int> class_counts;
  std::vector<int> skipped_classes;
};

/// Collapses predicted indices >= num_known to "unknown" and scores against
/// the target's ground truth. Requires ground truth and at least one
/// known-class sample.
OsMetrics os_metrics(std::span<const int> predictions, const TargetSet& target,
                     int num_known);

/// |k_star - k_gt|; both must be non-negative.
double k_error(int k_star, int k_gt);

/// Distinct ground-truth classes >= num_known in the target; 0 when the
/// target carries no ground truth.
int implicit_class_count(const TargetSet& target, int num_known);

struct CorrespondenceResult {
  int distinct = 0;       // ground-truth implicit classes covered
  bool short_supply = false;  // target had fewer than n samples
};

/// For each discovered output column, takes the n target samples with the
/// highest softmax probability for that column (ties to the lower row) and
/// counts the distinct ground-truth implicit classes among everything
/// selected.
CorrespondenceResult correspondence(const Mlp& f, const SoftmaxClassifier& c,
                                    const TargetSet& target, int n);

/// Final scorecard of one run. Serialization is canonical: two identically
/// filled reports dump to identical bytes.
struct MetricsReport {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string ablation;
  int k_star = 0;
  int k_gt = 0;
  double k_error = 0.0;
  double os = 0.0;
  double os_star = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<int> class_counts;
  std::vector<int> skipped_classes;
  std::map<int, int> correspondence;  // n -> distinct classes covered
};

std::string report_to_string(const MetricsReport& report);
MetricsReport report_from_string(const std::string& text);
void save_report(const std::string& path, const MetricsReport& report);
MetricsReport load_report(const std::string& path);

}  // namespace scda
