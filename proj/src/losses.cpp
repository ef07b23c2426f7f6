#include "scda/losses.hpp"

#include <cmath>
#include <string>

#include "scda/error.hpp"

namespace scda {

namespace {

constexpr double kProbClamp = 1e-7;

void require_distribution(std::span<const double> row, const char* what) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) {
      throw ContractViolation(std::string(what) +
                              ": negative or NaN probability entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ContractViolation(std::string(what) + ": row sums to " +
                            std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

double entropy(std::span<const double> probs_row) {
  require_distribution(probs_row, "entropy");
  double h = 0.0;
  for (double p : probs_row) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

CorrelationMatrix correlation_matrix(const Matrix& probs) {
  const int m = probs.rows();
  const int k = probs.cols();
  if (m < 2) {
    throw ContractViolation("correlation_matrix: batch must have >= 2 rows");
  }
  CorrelationMatrix cm;
  cm.probs = probs;
  cm.entropies.resize(m);
  cm.weights.resize(m);

  double total = 0.0;
  for (int n = 0; n < m; ++n) {
    cm.entropies[n] = entropy(probs.row(n));
    cm.weights[n] = 1.0 + std::exp(-cm.entropies[n]);
    total += cm.weights[n];
  }
  const double scale = static_cast<double>(m) / total;
  for (int n = 0; n < m; ++n) cm.weights[n] *= scale;

  cm.r = Matrix(k, k);
  for (int n = 0; n < m; ++n) {
    const double w = cm.weights[n];
    for (int i = 0; i < k; ++i) {
      const double wpi = w * probs.at(n, i);
      for (int j = 0; j < k; ++j) cm.r.at(i, j) += wpi * probs.at(n, j);
    }
  }

  cm.r_hat = Matrix(k, k);
  cm.row_sums.resize(k);
  cm.degenerate_rows.assign(k, 0);
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += cm.r.at(i, j);
    cm.row_sums[i] = s;
    if (s <= 0.0) {
      cm.degenerate_rows[i] = 1;
      cm.any_degenerate = true;
      for (int j = 0; j < k; ++j) cm.r_hat.at(i, j) = 1.0 / k;
    } else {
      for (int j = 0; j < k; ++j) cm.r_hat.at(i, j) = cm.r.at(i, j) / s;
    }
  }
  return cm;
}

Matrix correlation_backward(const CorrelationMatrix& cm,
                            const Matrix& d_r_hat) {
  const int m = cm.probs.rows();
  const int k = cm.probs.cols();
  if (d_r_hat.rows() != k || d_r_hat.cols() != k) {
    throw ShapeError("correlation_backward: d_r_hat must be " +
                     std::to_string(k) + "x" + std::to_string(k));
  }

  // d(loss)/d(r) through the row normalization.
  Matrix d_r(k, k);
  for (int i = 0; i < k; ++i) {
    if (cm.degenerate_rows[i]) continue;
    double dot = 0.0;
    for (int j = 0; j < k; ++j) dot += d_r_hat.at(i, j) * cm.r_hat.at(i, j);
    for (int j = 0; j < k; ++j)
      d_r.at(i, j) = (d_r_hat.at(i, j) - dot) / cm.row_sums[i];
  }

  // Bilinear path: r[i][j] = sum_n w_n p[n][i] p[n][j].
  Matrix d_probs(m, k);
  std::vector<double> d_weight(m, 0.0);
  for (int n = 0; n < m; ++n) {
    const double w = cm.weights[n];
    double quad = 0.0;
    for (int i = 0; i < k; ++i) {
      const double pni = cm.probs.at(n, i);
      double acc = 0.0;
      for (int j = 0; j < k; ++j) {
        acc += (d_r.at(i, j) + d_r.at(j, i)) * cm.probs.at(n, j);
        quad += d_r.at(i, j) * pni * cm.probs.at(n, j);
      }
      d_probs.at(n, i) = w * acc;
    }
    d_weight[n] = quad;
  }

  // Weight path: w_n = m * a_n / S with a_n = 1 + exp(-H_n).
  double total_a = 0.0;
  for (int n = 0; n < m; ++n) total_a += 1.0 + std::exp(-cm.entropies[n]);
  double c = 0.0;
  for (int n = 0; n < m; ++n) c += d_weight[n] * cm.weights[n];
  for (int n = 0; n < m; ++n) {
    const double d_a = (static_cast<double>(m) * d_weight[n] - c) / total_a;
    const double d_h = d_a * -std::exp(-cm.entropies[n]);
    for (int i = 0; i < k; ++i) {
      const double p = cm.probs.at(n, i);
      if (p > 0.0) d_probs.at(n, i) += d_h * -(std::log(p) + 1.0);
    }
  }
  return d_probs;
}

namespace {

void require_known_block(const CorrelationMatrix& cm, int num_known,
                         const char* what) {
  if (num_known < 1) {
    throw ContractViolation(std::string(what) + ": num_known must be >= 1");
  }
  if (cm.r_hat.cols() < num_known + 1) {
    throw ContractViolation(std::string(what) + ": out_dim " +
                            std::to_string(cm.r_hat.cols()) +
                            " leaves no implicit block beyond " +
                            std::to_string(num_known) + " known classes");
  }
}

}  // namespace

ProbLoss loss_adv(const CorrelationMatrix& cm, int num_known) {
  require_known_block(cm, num_known, "loss_adv");
  const int k = cm.r_hat.cols();

  double p = 0.0;
  for (int j = 0; j < num_known; ++j) p += cm.r_hat.at(j, num_known);
  p /= num_known;

  const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
  const double pc = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);

  ProbLoss out;
  out.value = -0.5 * (std::log(pc) + std::log(1.0 - pc));
  const double d_p = clamped ? 0.0 : 0.5 * (1.0 / (1.0 - pc) - 1.0 / pc);

  Matrix g(k, k);
  for (int j = 0; j < num_known; ++j) g.at(j, num_known) = d_p / num_known;
  out.d_probs = correlation_backward(cm, g);
  return out;
}

ProbLoss loss_kcc(const CorrelationMatrix& cm, int num_known) {
  require_known_block(cm, num_known, "loss_kcc");
  const int k = cm.r_hat.cols();

  ProbLoss out;
  Matrix g(k, k);
  for (int j = 0; j < num_known; ++j) {
    for (int j2 = 0; j2 < num_known; ++j2) {
      if (j2 == j) continue;
      out.value += cm.r_hat.at(j, j2);
      g.at(j, j2) = 1.0 / num_known;
    }
  }
  out.value /= num_known;
  out.d_probs = correlation_backward(cm, g);
  return out;
}

ProbLoss loss_tcc(const CorrelationMatrix& cm) {
  const int k = cm.r_hat.cols();
  ProbLoss out;
  Matrix g(k, k);
  for (int j = 0; j < k; ++j) {
    for (int j2 = 0; j2 < k; ++j2) {
      if (j2 == j) continue;
      out.value += cm.r_hat.at(j, j2);
      g.at(j, j2) = 1.0 / k;
    }
  }
  out.value /= k;
  out.d_probs = correlation_backward(cm, g);
  return out;
}

LogitLoss cross_entropy(const Matrix& probs, std::span<const int> labels) {
  const int m = probs.rows();
  const int k = probs.cols();
  if (static_cast<int>(labels.size()) != m) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(m) + " rows");
  }
  if (m == 0) throw ContractViolation("cross_entropy: empty batch");

  LogitLoss out;
  out.d_logits = Matrix(m, k);
  for (int n = 0; n < m; ++n) {
    const int label = labels[n];
    if (label < 0 || label >= k) {
      throw ContractViolation("cross_entropy: label " + std::to_string(label) +
                              " outside [0, " + std::to_string(k) + ")");
    }
    out.value -= std::log(std::max(probs.at(n, label), 1e-300));
    for (int j = 0; j < k; ++j) {
      out.d_logits.at(n, j) =
          (probs.at(n, j) - (j == label ? 1.0 : 0.0)) / m;
    }
  }
  out.value /= m;
  return out;
}

namespace {

double require_term(const std::optional<double>& term, const char* name) {
  if (!term) {
    throw ContractViolation(std::string("loss bundle: required term ") + name +
                            " is absent");
  }
  return *term;
}

}  // namespace

PretrainObjectives pretrain_objectives(const LossBundle& b) {
  const double l_s = require_term(b.l_s, "l_s");
  const double l_adv = require_term(b.l_adv, "l_adv");
  const double l_kcc = require_term(b.l_kcc, "l_kcc");
  return {l_s - l_adv + l_kcc, l_s + l_adv + l_kcc};
}

double adapt_objective(const LossBundle& b) {
  const double l_s = require_term(b.l_s, "l_s");
  const double l_tcc = require_term(b.l_tcc, "l_tcc");
  return l_s + b.l_t.value_or(0.0) + l_tcc;
}

}  // namespace scda
