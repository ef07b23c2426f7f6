#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scda/data.hpp"
#include "scda/discovery.hpp"
#include "scda/eval.hpp"
#include "scda/net.hpp"
#include "scda/rng.hpp"

namespace scda {

/// Training variants used by the ablation study.
///   full           pre-train, then every outer epoch re-estimates k_star
///   pretrain_only  adversarial pre-training, no outer epochs
///   k_fixed_1      k_star pinned to 1 (single pooled unknown class)
///   k_star_no_iters one outer epoch with estimated k_star
///   k_gt_no_iters  one outer epoch with k_star = ground-truth count
///   k_gt_iters     every outer epoch with k_star = ground-truth count
enum class AblationMode {
  Full,
  PretrainOnly,
  KFixed1,
  KStarNoIters,
  KGtNoIters,
  KGtIters,
};

const char* ablation_name(AblationMode mode);
AblationMode ablation_from_name(const std::string& name);

struct TrainConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 32;
  int pretrain_epochs = 100;
  int inner_epochs = 30;
  int outer_epochs = 15;
  int k_max = 10;
  int pca_dim = 16;  // clamped to feature_dim
  int restarts = 8;
  double grl_lambda = 1.0;
  double kneedle_sensitivity = 1.0;
  std::vector<int> hidden_dims{32, 32};
  int feature_dim = 16;
  std::uint64_t seed = 0;
  AblationMode ablation_mode = AblationMode::Full;
  int k_gt = 0;  // required >= 1 by the k_gt_* modes
};

/// Throws ContractViolation on out-of-range values.
void validate_config(const TrainConfig& cfg);

DiscoveryConfig discovery_config(const TrainConfig& cfg);

struct OuterEpochLog {
  int epoch = 0;  // 1-based outer epoch
  int k_star = 1;
  int k_ca = 0;
  int k_elbow = 0;
  bool estimated = false;          // estimate_k ran this epoch
  bool discovery_aborted = false;  // no implicit candidates; model kept
  double mean_l_s = 0.0;
  double mean_l_t = 0.0;  // over the steps that had pseudo-labeled batches
  double mean_l_tcc = 0.0;
  double mean_objective = 0.0;
  double os = 0.0;
  double os_star = 0.0;
  bool evaluated = false;  // ground truth was available
};

struct RunState {
  Mlp f;
  SoftmaxClassifier c;
  int k_star = 1;
  int epoch = 0;  // completed outer epochs
  std::vector<double> pretrain_objective;  // mean classifier objective/epoch
  std::vector<OuterEpochLog> outer_log;
  KEstimate latest_estimate;
  DiscoveryResult latest_discovery;
};

/// Optional observers; both may be empty. on_outer_epoch sees the model
/// right after the epoch (checkpointing hook).
struct RunHooks {
  std::function<void(int epoch, double objective_c)> on_pretrain_epoch;
  std::function<void(const OuterEpochLog&, const Mlp&,
                     const SoftmaxClassifier&)>
      on_outer_epoch;
};

/// Adversarial pre-training. Per optimizer step: one source batch scored
/// with cross-entropy, one target batch scored with the domain-confusion
/// and known-confusion losses; the confusion gradient reaches F through
/// GradScale(-grl_lambda) so that F maximizes what C minimizes. Requires
/// C.out_dim == num_known + 1. Appends the per-epoch mean classifier
/// objective to objective_log when given.
void pretrain(Mlp& f, SoftmaxClassifier& c, const LabeledSet& source,
              const TargetSet& target, const TrainConfig& cfg, Rng& rng,
              std::vector<double>* objective_log = nullptr,
              const RunHooks* hooks = nullptr);

/// One outer epoch: candidate selection, k_star choice per ablation mode,
/// classifier restructure, pseudo-label refresh, then inner_epochs of
/// self-supervised training (source cross-entropy + pseudo-label
/// cross-entropy + total-confusion loss). With no implicit candidates the
/// epoch trains with the previous classifier and labels, flagged.
void adapt_epoch(RunState& state, const LabeledSet& source, TargetSet& target,
                 const TrainConfig& cfg, const Rng& rng);

struct RunOutput {
  RunState state;
  MetricsReport report;
};

/// Full pipeline: fresh model from cfg.seed, pretrain, outer epochs per the
/// ablation mode (none for pretrain_only, one for the *_no_iters modes,
/// outer_epochs otherwise), final metrics. Deterministic in cfg.seed; all
/// randomness is forked from it. target pseudo-labels are left in their
/// final state.
RunOutput run(const TrainConfig& cfg, const LabeledSet& source,
              TargetSet& target, const RunHooks* hooks = nullptr);

}  // namespace scda
