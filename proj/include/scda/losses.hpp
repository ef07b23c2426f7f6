#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "scda/matrix.hpp"

namespace scda {

/// Shannon entropy (natural log) of one probability row. Entries must be
/// nonnegative and sum to 1 within 1e-6; 0*log(0) counts as 0.
double entropy(std::span<const double> probs_row);

/// Entropy-weighted class correlation matrix over one batch of m >= 2
/// probability rows. Per-sample weight
///   w_n = m * (1 + exp(-H_n)) / sum_n' (1 + exp(-H_n'))
/// (so sum w_n == m), then r[i][j] = sum_n w_n * p[n][i] * p[n][j] and r_hat
/// is r with each row divided by its sum. A zero row sum makes that r_hat
/// row uniform and marks it degenerate. Inputs are retained so the exact
/// gradient (including the entropy-weight dependence) can be formed later.
struct CorrelationMatrix {
  Matrix probs;                  // m x k, the input batch
  std::vector<double> entropies;  // H_n
  std::vector<double> weights;    // w_n
  Matrix r;                       // k x k
  Matrix r_hat;                   // row-normalized r
  std::vector<double> row_sums;   // row sums of r
  std::vector<std::uint8_t> degenerate_rows;
  bool any_degenerate = false;
};

CorrelationMatrix correlation_matrix(const Matrix& probs);

/// Chain rule from d(loss)/d(r_hat) back to d(loss)/d(probs), covering both
/// the bilinear form and the path through the entropy weights. Degenerate
/// rows contribute nothing (their uniform fallback is constant).
Matrix correlation_backward(const CorrelationMatrix& cm, const Matrix& d_r_hat);

/// A scalar loss differentiated w.r.t. the probability batch.
struct ProbLoss {
  double value = 0.0;
  Matrix d_probs;
};

/// A scalar loss differentiated w.r.t. the logits.
struct LogitLoss {
  double value = 0.0;
  Matrix d_logits;
};

/// Domain-confusion loss: p = mean over known rows j of r_hat[j][num_known]
/// (the first implicit column), scored with binary cross-entropy against
/// 0.5: -(log(p) + log(1-p))/2. p is clamped to [1e-7, 1-1e-7] before the
/// logs; a clamped p gets zero gradient. Minimum value is ln 2 at p = 0.5.
ProbLoss loss_adv(const CorrelationMatrix& cm, int num_known);

/// Cross-known-class confusion: mean over known rows of the off-diagonal
/// r_hat mass inside the known block; implicit columns are not punished.
ProbLoss loss_kcc(const CorrelationMatrix& cm, int num_known);

/// Total confusion: mean over all rows of all off-diagonal r_hat mass.
ProbLoss loss_tcc(const CorrelationMatrix& cm);

/// Mean negative log-likelihood of the labels; gradient is taken w.r.t. the
/// logits that produced `probs`: (probs - onehot) / batch.
LogitLoss cross_entropy(const Matrix& probs, std::span<const int> labels);

/// Per-batch loss values; a term that was not computed is absent, never 0.
struct LossBundle {
  std::optional<double> l_s;
  std::optional<double> l_adv;
  std::optional<double> l_kcc;
  std::optional<double> l_tcc;
  std::optional<double> l_t;
};

/// Pre-training objectives: F minimizes l_s - l_adv + l_kcc while C
/// minimizes l_s + l_adv + l_kcc (one backward pass with the adversarial
/// term routed through GradScale(-lambda) into F realizes both).
struct PretrainObjectives {
  double objective_f = 0.0;
  double objective_c = 0.0;
};

PretrainObjectives pretrain_objectives(const LossBundle& b);

/// Adaptation objective l_s + l_t + l_tcc; l_t may be absent (no pseudo
/// labels yet), the other two are required.
double adapt_objective(const LossBundle& b);

}  // namespace scda
