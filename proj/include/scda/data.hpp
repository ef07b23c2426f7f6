#pragma once

#include <string>
#include <vector>

#include "scda/matrix.hpp"
#include "scda/rng.hpp"

namespace scda {

class TargetSet;

namespace eval::detail {
// Sole reader of target ground truth; defined by the eval module.
const std::vector<int>& ground_truth(const TargetSet& t);
}  // namespace eval::detail

/// Labeled source-domain samples over classes [0, num_classes).
struct LabeledSet {
  Matrix features;          // n x d
  std::vector<int> labels;  // class per row
  int num_classes = 0;
};

/// Unlabeled target-domain samples. Ground truth rides along for evaluation
/// but is readable only through scda::eval; training code sees features and
/// pseudo labels alone. Pseudo label -1 means "not assigned yet".
class TargetSet {
 public:
  TargetSet() = default;
  TargetSet(Matrix features, std::vector<int> ground_truth);

  const Matrix& features() const { return features_; }
  int size() const { return features_.rows(); }
  int dim() const { return features_.cols(); }
  bool has_ground_truth() const { return !ground_truth_.empty(); }

  std::vector<int>& pseudo_labels() { return pseudo_labels_; }
  const std::vector<int>& pseudo_labels() const { return pseudo_labels_; }

 private:
  Matrix features_;
  std::vector<int> ground_truth_;  // empty when unavailable
  std::vector<int> pseudo_labels_;

  friend const std::vector<int>& eval::detail::ground_truth(const TargetSet&);
  friend void save_csv(const std::string& path, const TargetSet& set);
  friend TargetSet load_target_csv(const std::string& path);
};

/// Synthetic open-set benchmark: Gaussian class blobs with a domain shift.
/// Source covers the first num_known classes; the target covers all
/// num_known + num_implicit classes and is pushed through the affine map
///   y = shift_scale * R(rotation_angle) * x + translation
/// where R rotates each consecutive coordinate plane (0,1), (2,3), ... by
/// the same angle. Class centers are rejection-sampled until every pair is
/// at least min_separation_sigmas * sigma apart; center_dim > 0 confines the
/// centers to the first center_dim coordinates (noise stays full-dim),
/// which makes several implicit blobs share the region a single softmax
/// cell would have to cover. imbalance_ratio < 1 shrinks a quarter of the
/// classes (chosen by the generator stream) to that fraction of their
/// sample budget.
struct ShiftSpec {
  int num_known = 4;
  int num_implicit = 3;
  int dim = 6;
  double sigma = 1.0;
  double center_range = 20.0;
  double min_separation_sigmas = 6.0;
  int center_dim = 0;  // 0 = full-dimensional centers
  double rotation_angle = 0.45;
  std::vector<double> translation;  // empty = zeros; single entry broadcasts
  double shift_scale = 1.1;
  int source_per_class = 100;
  int target_per_class = 100;
  double imbalance_ratio = 1.0;
};

struct GeneratedPair {
  LabeledSet source;
  TargetSet target;
};

/// Range checks on every ShiftSpec field; throws ContractViolation.
/// generate runs it implicitly.
void validate_shift_spec(const ShiftSpec& spec);

/// Deterministic per rng seed. Throws GeneratorError when center sampling
/// cannot satisfy the separation within 10^4 draws.
GeneratedPair generate(const ShiftSpec& spec, Rng& rng);

/// CSV schema: header `f0,...,f{d-1},label[,gt]`, LF endings, `.` decimal
/// point, 17-significant-digit floats. Source files require labels >= 0;
/// target files use the label column for pseudo labels (-1 = unassigned)
/// and the optional gt column for evaluation-only ground truth.
LabeledSet load_labeled_csv(const std::string& path);
TargetSet load_target_csv(const std::string& path);
void save_csv(const std::string& path, const LabeledSet& set);
void save_csv(const std::string& path, const TargetSet& set);

/// Shuffled epoch partition of [0, n); a final batch shorter than 2 is
/// dropped (the correlation matrix needs at least two rows).
std::vector<std::vector<int>> batches(int n, int batch_size, Rng& rng);

}  // namespace scda
