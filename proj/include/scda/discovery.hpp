#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scda/data.hpp"
#include "scda/matrix.hpp"
#include "scda/net.hpp"
#include "scda/rng.hpp"

namespace scda {

struct DiscoveryConfig {
  int k_max = 10;       // implicit-class counts swept: 1..k_max
  int pca_dim = 16;     // feature reduction before clustering
  int restarts = 8;     // k-means restarts, best SSE wins
  int max_lloyd_iters = 100;
  double kneedle_sensitivity = 1.0;
};

/// Confident target samples, split by predicted block. Row r of kn_features
/// belongs to target sample kn_indices[r] with pseudo-label kn_labels[r]
/// (always < num_known); im_* rows are predicted-implicit. Features are the
/// extractor outputs after PCA.
struct CandidateSets {
  int num_known = 0;
  std::vector<int> kn_indices;
  std::vector<int> kn_labels;
  Matrix kn_features;
  std::vector<int> im_indices;
  Matrix im_features;
};

/// Pseudo-labels every target sample by classifier argmax, then keeps the
/// lowest-entropy ceil(half) of each pseudo-class (entropy ties resolved by
/// row index). PCA is fitted on the full target feature matrix. A class
/// with no members simply contributes nothing; im_* may come back empty
/// when nothing is predicted implicit.
CandidateSets select_candidates(const Mlp& f, const SoftmaxClassifier& c,
                                const TargetSet& target,
                                const DiscoveryConfig& cfg);

struct Clustering {
  int k = 0;
  Matrix centroids;             // k x d
  std::vector<int> assignment;  // cluster id per point
  double sse = 0.0;
  std::vector<double> sse_trace;  // post-assignment SSE per Lloyd iteration
  bool empty_fix_applied = false;
};

/// Best-of-`restarts` Lloyd runs with D^2 (k-means++) seeding. Restart r
/// draws from rng.fork(r), so results do not depend on evaluation order or
/// on how much of `rng` was consumed elsewhere. An assignment fixpoint ends
/// a run; a cluster that empties is re-seeded with the point farthest from
/// its current centroid (among clusters that can spare one).
Clustering kmeans_pp(const Matrix& x, int k, const Rng& rng, int restarts,
                     int max_iters = 100);

/// Maximum-total-profit injective mapping of rows to columns.
/// row_to_col[i] == -1 means row i is left unmapped.
struct AssignmentResult {
  double profit = 0.0;
  std::vector<int> row_to_col;
};

AssignmentResult max_assignment(const Matrix& profit);

/// Fraction of points whose cluster maps to their label under the best
/// injective cluster-to-label mapping of the co-occurrence counts.
double clustering_accuracy(std::span<const int> clusters,
                           std::span<const int> labels, int num_clusters,
                           int num_labels);

/// Kneedle on a (k, sse) sweep: min-max normalize both axes, form
/// y_diff = (1 - y_norm) - x_norm, and return the interior k maximizing
/// y_diff when that maximum clears sensitivity * mean(delta x_norm).
/// No qualifying knee (flat or linear curves included) -> nullopt.
struct ElbowResult {
  std::optional<int> knee;
};

ElbowResult elbow_k(std::span<const int> ks, std::span<const double> sses,
                    double sensitivity = 1.0);

struct SweepPoint {
  int k_total = 0;
  double sse = 0.0;
  double ca = 0.0;
};

struct KEstimate {
  int k_ca = 0;     // total clusters maximizing CA (ties -> smallest)
  int k_elbow = 0;  // total clusters at the SSE knee
  int k_hat = 0;    // half-up rounded mean of k_ca and k_elbow
  int k_star = 1;   // implicit-class estimate, >= 1
  bool elbow_fallback = false;  // no knee found; k_elbow copied from k_ca
  bool updated = true;  // false: no implicit candidates, prior k_star kept
  std::vector<SweepPoint> sweep;
};

/// Sweeps total-cluster counts num_known+1 .. num_known+k_max over the
/// combined candidate features (SSE on all, CA on the known part only).
/// Sweep value c clusters with rng.fork(c). Fewer than 4 sweep points make
/// the knee undefined; k_elbow then falls back to k_ca.
KEstimate estimate_k(const CandidateSets& cands, const DiscoveryConfig& cfg,
                     int prior_k_star, const Rng& rng);

/// Clusters the implicit candidates into k_star groups; group g is the new
/// class first_new_label + g. k_star larger than |t_im| is clamped.
struct DiscoveryResult {
  int k_star = 0;
  int first_new_label = 0;
  bool clamped = false;
  std::vector<std::vector<int>> pseudo_classes;  // target row ids per group
};

DiscoveryResult assign_pseudo_classes(const CandidateSets& cands, int k_star,
                                      const DiscoveryConfig& cfg,
                                      const Rng& rng);

/// CSV dump of a sweep: header k_total,sse,ca.
void write_sweep_csv(const std::string& path, const KEstimate& estimate);

}  // namespace scda
