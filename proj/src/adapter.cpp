#include "scda/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scda/error.hpp"
#include "scda/losses.hpp"
#include "scda/matrix.hpp"

namespace scda {

namespace {

// Rng stream layout, all forked from Rng(cfg.seed):
//   fork(1)       model initialization
//   fork(2)       pretrain batch shuffles
//   fork(100+e)   outer epoch e (1-based); adapt_epoch forks further:
//                 1 estimate, 2 pseudo-class assignment, 3 restructure,
//                 4 batch shuffles
constexpr std::uint64_t kSaltModel = 1;
constexpr std::uint64_t kSaltPretrain = 2;
constexpr std::uint64_t kSaltOuterBase = 100;

std::vector<int> take_labels(const std::vector<int>& labels,
                             const std::vector<int>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

void require_finite_value(double v, const std::string& context) {
  if (!std::isfinite(v))
    throw NumericalError(context + ": non-finite objective");
}

void require_finite_probs(const Matrix& probs, const std::string& context) {
  if (!probs.all_finite())
    throw NumericalError(context + ": non-finite network output");
}


std::vector<int> predict(const Mlp& f, const SoftmaxClassifier& c,
                         const Matrix& x) {
  const Matrix probs = forward(f, c, x).probs;
  std::vector<int> preds(static_cast<std::size_t>(probs.rows()));
  for (int i = 0; i < probs.rows(); ++i)
    preds[static_cast<std::size_t>(i)] = argmax(probs.row(i));
  return preds;
}

}  // namespace

const char* ablation_name(AblationMode mode) {
  switch (mode) {
    case AblationMode::Full: return "full";
    case AblationMode::PretrainOnly: return "pretrain_only";
    case AblationMode::KFixed1: return "k_fixed_1";
    case AblationMode::KStarNoIters: return "k_star_no_iters";
    case AblationMode::KGtNoIters: return "k_gt_no_iters";
    case AblationMode::KGtIters: return "k_gt_iters";
  }
  throw ContractViolation("ablation_name: invalid mode");
}

AblationMode ablation_from_name(const std::string& name) {
  if (name == "full") return AblationMode::Full;
  if (name == "pretrain_only") return AblationMode::PretrainOnly;
  if (name == "k_fixed_1") return AblationMode::KFixed1;
  if (name == "k_star_no_iters") return AblationMode::KStarNoIters;
  if (name == "k_gt_no_iters") return AblationMode::KGtNoIters;
  if (name == "k_gt_iters") return AblationMode::KGtIters;
  throw ContractViolation("unknown ablation mode '" + name + "'");
}

void validate_config(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ContractViolation("config: lr > 0");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw ContractViolation("config: momentum in [0, 1)");
  if (cfg.weight_decay < 0.0) throw ContractViolation("config: weight_decay >= 0");
  if (cfg.batch_size < 2) throw ContractViolation("config: batch_size >= 2");
  if (cfg.pretrain_epochs < 0) throw ContractViolation("config: pretrain_epochs >= 0");
  if (cfg.inner_epochs < 1) throw ContractViolation("config: inner_epochs >= 1");
  if (cfg.outer_epochs < 1) throw ContractViolation("config: outer_epochs >= 1");
  if (cfg.k_max < 2) throw ContractViolation("config: k_max >= 2");
  if (cfg.pca_dim < 1) throw ContractViolation("config: pca_dim >= 1");
  if (cfg.restarts < 1) throw ContractViolation("config: restarts >= 1");
  if (!(cfg.kneedle_sensitivity > 0.0))
    throw ContractViolation("config: kneedle_sensitivity > 0");
  if (cfg.feature_dim < 1) throw ContractViolation("config: feature_dim >= 1");
  for (int h : cfg.hidden_dims)
    if (h < 1) throw ContractViolation("config: hidden widths >= 1");
  if ((cfg.ablation_mode == AblationMode::KGtNoIters ||
       cfg.ablation_mode == AblationMode::KGtIters) &&
      cfg.k_gt < 1) {
    throw ContractViolation("config: k_gt >= 1 required by the k_gt_* modes");
  }
}

DiscoveryConfig discovery_config(const TrainConfig& cfg) {
  DiscoveryConfig d;
  d.k_max = cfg.k_max;
  d.pca_dim = std::min(cfg.pca_dim, cfg.feature_dim);
  d.restarts = cfg.restarts;
  d.kneedle_sensitivity = cfg.kneedle_sensitivity;
  return d;
}

void pretrain(Mlp& f, SoftmaxClassifier& c, const LabeledSet& source,
              const TargetSet& target, const TrainConfig& cfg, Rng& rng,
              std::vector<double>* objective_log, const RunHooks* hooks) {
  validate_config(cfg);
  if (source.features.rows() < 2 || target.size() < 2)
    throw ContractViolation("pretrain: need at least 2 source and 2 target samples");
  if (c.num_known != source.num_classes)
    throw ShapeError("pretrain: classifier num_known != source classes");
  if (c.out_dim() != c.num_known + 1)
    throw ContractViolation("pretrain: classifier must start with one implicit output");

  const int nk = c.num_known;
  SgdState sgd = make_sgd_state(
      f, c, SgdConfig{cfg.lr, cfg.momentum, cfg.weight_decay});

  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    const std::string context = "pretrain epoch " + std::to_string(epoch + 1);
    const auto src_batches =
        batches(source.features.rows(), cfg.batch_size, rng);
    const auto tgt_batches = batches(target.size(), cfg.batch_size, rng);
    const std::size_t steps = std::min(src_batches.size(), tgt_batches.size());

    double objective_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const Matrix xs = take_rows(source.features, src_batches[s]);
      const std::vector<int> ys = take_labels(source.labels, src_batches[s]);
      ForwardResult fs = forward(f, c, xs);
      require_finite_probs(fs.probs, context);
      LogitLoss ce = cross_entropy(fs.probs, ys);
      Gradients grads = backward_from_logits(f, c, fs.cache, ce.d_logits);

      const Matrix xt = take_rows(target.features(), tgt_batches[s]);
      ForwardResult ft = forward(f, c, xt);
      require_finite_probs(ft.probs, context);
      CorrelationMatrix cm = correlation_matrix(ft.probs);
      ProbLoss adv = loss_adv(cm, nk);
      ProbLoss kcc = loss_kcc(cm, nk);
      grads += backward_from_probs(f, c, ft.cache, adv.d_probs,
                                   GradScale{-cfg.grl_lambda});
      grads += backward_from_probs(f, c, ft.cache, kcc.d_probs);

      LossBundle bundle;
      bundle.l_s = ce.value;
      bundle.l_adv = adv.value;
      bundle.l_kcc = kcc.value;
      objective_sum += pretrain_objectives(bundle).objective_c;

      sgd_step(f, c, grads, sgd);
    }
    const double mean = objective_sum / static_cast<double>(steps);
    require_finite_value(mean, context);
    if (objective_log) objective_log->push_back(mean);
    if (hooks && hooks->on_pretrain_epoch) hooks->on_pretrain_epoch(epoch + 1, mean);
  }
}

void adapt_epoch(RunState& state, const LabeledSet& source, TargetSet& target,
                 const TrainConfig& cfg, const Rng& rng) {
  validate_config(cfg);
  if (source.features.rows() < 2 || target.size() < 2)
    throw ContractViolation("adapt_epoch: need at least 2 source and 2 target samples");

  const int nk = state.c.num_known;
  const DiscoveryConfig dcfg = discovery_config(cfg);

  OuterEpochLog log;
  log.epoch = state.epoch + 1;
  log.k_star = state.k_star;

  {
    ForwardResult probe = forward(state.f, state.c, target.features());
    require_finite_probs(probe.probs,
                         "outer epoch " + std::to_string(log.epoch));
  }
  CandidateSets cands = select_candidates(state.f, state.c, target, dcfg);
  if (cands.im_indices.empty()) {
    // Nothing is predicted implicit: keep the classifier and the previous
    // pseudo-labels and train another round at the prior width.
    log.discovery_aborted = true;
  } else {
    int k_new = state.k_star;
    switch (cfg.ablation_mode) {
      case AblationMode::Full:
      case AblationMode::KStarNoIters: {
        KEstimate est = estimate_k(cands, dcfg, state.k_star, rng.fork(1));
        state.latest_estimate = est;
        log.k_ca = est.k_ca;
        log.k_elbow = est.k_elbow;
        log.estimated = est.updated;
        k_new = est.k_star;
        break;
      }
      case AblationMode::KFixed1:
        k_new = 1;
        break;
      case AblationMode::KGtNoIters:
      case AblationMode::KGtIters:
        k_new = cfg.k_gt;
        break;
      case AblationMode::PretrainOnly:
        throw ContractViolation("adapt_epoch: pretrain_only runs no outer epochs");
    }

    DiscoveryResult dres = assign_pseudo_classes(cands, k_new, dcfg, rng.fork(2));
    state.latest_discovery = dres;
    state.k_star = dres.k_star;
    log.k_star = dres.k_star;

    Rng restructure_rng = rng.fork(3);
    state.c = restructure(state.c, dres.k_star, restructure_rng);

    std::vector<int>& pseudo = target.pseudo_labels();
    std::fill(pseudo.begin(), pseudo.end(), -1);
    for (std::size_t i = 0; i < cands.kn_indices.size(); ++i)
      pseudo[static_cast<std::size_t>(cands.kn_indices[i])] = cands.kn_labels[i];
    for (std::size_t g = 0; g < dres.pseudo_classes.size(); ++g)
      for (int idx : dres.pseudo_classes[g])
        pseudo[static_cast<std::size_t>(idx)] =
            dres.first_new_label + static_cast<int>(g);
  }

  const std::vector<int>& pseudo = target.pseudo_labels();
  std::vector<int> pseudo_rows;
  for (int i = 0; i < target.size(); ++i) {
    if (pseudo[static_cast<std::size_t>(i)] < 0) continue;
    if (pseudo[static_cast<std::size_t>(i)] >= state.c.out_dim())
      throw ContractViolation("adapt_epoch: pseudo label out of classifier range");
    pseudo_rows.push_back(i);
  }

  SgdState sgd = make_sgd_state(
      state.f, state.c, SgdConfig{cfg.lr, cfg.momentum, cfg.weight_decay});
  Rng brng = rng.fork(4);

  double sum_l_s = 0.0, sum_l_t = 0.0, sum_l_tcc = 0.0, sum_obj = 0.0;
  long steps_total = 0, steps_with_l_t = 0;

  for (int inner = 0; inner < cfg.inner_epochs; ++inner) {
    const std::string context = "outer epoch " + std::to_string(log.epoch) +
                                ", inner epoch " + std::to_string(inner + 1);
    const auto src_batches =
        batches(source.features.rows(), cfg.batch_size, brng);
    const auto tgt_batches = batches(target.size(), cfg.batch_size, brng);
    const auto pseudo_batches =
        pseudo_rows.size() >= 2
            ? batches(static_cast<int>(pseudo_rows.size()), cfg.batch_size, brng)
            : std::vector<std::vector<int>>{};
    const std::size_t steps = std::min(src_batches.size(), tgt_batches.size());

    double epoch_obj = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const Matrix xs = take_rows(source.features, src_batches[s]);
      const std::vector<int> ys = take_labels(source.labels, src_batches[s]);
      ForwardResult fs = forward(state.f, state.c, xs);
      require_finite_probs(fs.probs, context);
      LogitLoss ce = cross_entropy(fs.probs, ys);
      Gradients grads =
          backward_from_logits(state.f, state.c, fs.cache, ce.d_logits);

      const Matrix xt = take_rows(target.features(), tgt_batches[s]);
      ForwardResult ft = forward(state.f, state.c, xt);
      require_finite_probs(ft.probs, context);
      CorrelationMatrix cm = correlation_matrix(ft.probs);
      ProbLoss tcc = loss_tcc(cm);
      grads += backward_from_probs(state.f, state.c, ft.cache, tcc.d_probs);

      LossBundle bundle;
      bundle.l_s = ce.value;
      bundle.l_tcc = tcc.value;

      if (s < pseudo_batches.size()) {
        std::vector<int> rows;
        rows.reserve(pseudo_batches[s].size());
        for (int p : pseudo_batches[s]) rows.push_back(pseudo_rows[static_cast<std::size_t>(p)]);
        const Matrix xp = take_rows(target.features(), rows);
        const std::vector<int> yp = take_labels(pseudo, rows);
        ForwardResult fp = forward(state.f, state.c, xp);
        require_finite_probs(fp.probs, context);
        LogitLoss pl = cross_entropy(fp.probs, yp);
        grads += backward_from_logits(state.f, state.c, fp.cache, pl.d_logits);
        bundle.l_t = pl.value;
        sum_l_t += pl.value;
        ++steps_with_l_t;
      }

      const double obj = adapt_objective(bundle);
      epoch_obj += obj;
      sum_obj += obj;
      sum_l_s += ce.value;
      sum_l_tcc += tcc.value;
      ++steps_total;

      sgd_step(state.f, state.c, grads, sgd);
    }
    require_finite_value(epoch_obj / static_cast<double>(steps), context);
  }

  log.mean_l_s = sum_l_s / static_cast<double>(steps_total);
  log.mean_l_tcc = sum_l_tcc / static_cast<double>(steps_total);
  log.mean_l_t =
      steps_with_l_t > 0 ? sum_l_t / static_cast<double>(steps_with_l_t) : 0.0;
  log.mean_objective = sum_obj / static_cast<double>(steps_total);

  if (target.has_ground_truth()) {
    OsMetrics m = os_metrics(predict(state.f, state.c, target.features()),
                             target, nk);
    log.os = m.os;
    log.os_star = m.os_star;
    log.evaluated = true;
  }

  ++state.epoch;
  state.outer_log.push_back(log);
}

RunOutput run(const TrainConfig& cfg, const LabeledSet& source,
              TargetSet& target, const RunHooks* hooks) {
  validate_config(cfg);
  if (source.features.empty()) throw ShapeError("run: empty source set");
  if (target.size() == 0) throw ShapeError("run: empty target set");
  if (source.features.cols() != target.dim())
    throw ShapeError("run: source and target dimensions differ");

  const Rng root(cfg.seed);
  RunOutput out;

  Rng model_rng = root.fork(kSaltModel);
  out.state.f = make_mlp(source.features.cols(), cfg.hidden_dims,
                         cfg.feature_dim, model_rng);
  out.state.c =
      make_classifier(cfg.feature_dim, source.num_classes, 1, model_rng);
  out.state.k_star = 1;

  Rng pretrain_rng = root.fork(kSaltPretrain);
  pretrain(out.state.f, out.state.c, source, target, cfg, pretrain_rng,
           &out.state.pretrain_objective, hooks);

  int epochs = cfg.outer_epochs;
  switch (cfg.ablation_mode) {
    case AblationMode::PretrainOnly: epochs = 0; break;
    case AblationMode::KStarNoIters:
    case AblationMode::KGtNoIters: epochs = 1; break;
    default: break;
  }

  for (int e = 1; e <= epochs; ++e) {
    adapt_epoch(out.state, source, target, cfg,
                root.fork(kSaltOuterBase + static_cast<std::uint64_t>(e)));
    if (hooks && hooks->on_outer_epoch)
      hooks->on_outer_epoch(out.state.outer_log.back(), out.state.f,
                            out.state.c);
  }

  MetricsReport& report = out.report;
  report.seed = cfg.seed;
  report.ablation = ablation_name(cfg.ablation_mode);
  report.k_star = out.state.k_star;
  if (target.has_ground_truth()) {
    OsMetrics m = os_metrics(
        predict(out.state.f, out.state.c, target.features()), target,
        out.state.c.num_known);
    report.os = m.os;
    report.os_star = m.os_star;
    report.per_class_accuracy = m.per_class;
    report.class_counts = m.class_counts;
    report.skipped_classes = m.skipped_classes;
    report.k_gt = implicit_class_count(target, out.state.c.num_known);
    report.k_error = k_error(report.k_star, report.k_gt);
    for (int n : {1, 3}) {
      report.correspondence[n] =
          correspondence(out.state.f, out.state.c, target, n).distinct;
    }
  }
  return out;
}

}  // namespace scda
