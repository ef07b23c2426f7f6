#include "scda/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scda/error.hpp"

namespace scda {

void symmetric_eigen(const Matrix& a, std::vector<double>& values,
                     Matrix& vectors) {
  if (a.rows() != a.cols()) {
    throw ShapeError("symmetric_eigen: matrix must be square, got " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  const int n = a.rows();
  Matrix m = a;
  vectors = Matrix::identity(n);

  constexpr int kMaxSweeps = 64;
  constexpr double kTol = 1e-14;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
    if (off <= kTol * kTol) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int i = 0; i < n; ++i) {
          const double mip = m.at(i, p);
          const double miq = m.at(i, q);
          m.at(i, p) = c * mip - s * miq;
          m.at(i, q) = s * mip + c * miq;
        }
        for (int i = 0; i < n; ++i) {
          const double mpi = m.at(p, i);
          const double mqi = m.at(q, i);
          m.at(p, i) = c * mpi - s * mqi;
          m.at(q, i) = s * mpi + c * mqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = vectors.at(i, p);
          const double viq = vectors.at(i, q);
          vectors.at(i, p) = c * vip - s * viq;
          vectors.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  values.resize(n);
  for (int i = 0; i < n; ++i) values[i] = m.at(i, i);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a_, int b_) { return values[a_] > values[b_]; });
  std::vector<double> sorted_values(n);
  Matrix sorted_vectors(n, n);
  for (int k = 0; k < n; ++k) {
    sorted_values[k] = values[order[k]];
    for (int i = 0; i < n; ++i)
      sorted_vectors.at(i, k) = vectors.at(i, order[k]);
  }
  values = std::move(sorted_values);
  vectors = std::move(sorted_vectors);
}

PcaTransform fit_pca(const Matrix& x, int d_out) {
  if (x.rows() == 0 || x.cols() == 0) {
    throw ShapeError("fit_pca: input must be non-empty");
  }
  if (d_out < 1) throw ContractViolation("fit_pca: d_out must be >= 1");
  const int n = x.rows();
  const int d = x.cols();
  const int keep = std::min(d_out, d);

  PcaTransform t;
  t.mean.assign(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) t.mean[j] += x.at(i, j);
  for (int j = 0; j < d; ++j) t.mean[j] /= static_cast<double>(n);

  Matrix centered(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) centered.at(i, j) = x.at(i, j) - t.mean[j];

  Matrix cov = matmul_transpose_a(centered, centered);
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  scale_inplace(cov, 1.0 / denom);

  std::vector<double> values;
  Matrix vectors;
  symmetric_eigen(cov, values, vectors);

  double total = 0.0;
  for (double v : values) total += std::max(v, 0.0);
  t.zero_variance = total <= 1e-12;

  t.d_out = keep;
  t.components = Matrix(d, keep);
  t.eigenvalues.assign(values.begin(), values.begin() + keep);
  for (int k = 0; k < keep; ++k) {
    // Sign convention: largest-|entry| coordinate made positive.
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < d; ++i) {
      const double mag = std::abs(vectors.at(i, k));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    const double sign = vectors.at(arg, k) < 0.0 ? -1.0 : 1.0;
    for (int i = 0; i < d; ++i) t.components.at(i, k) = sign * vectors.at(i, k);
  }
  return t;
}

Matrix apply_pca(const PcaTransform& t, const Matrix& x) {
  if (x.cols() != static_cast<int>(t.mean.size())) {
    throw ShapeError("apply_pca: input has " + std::to_string(x.cols()) +
                     " columns, transform expects " +
                     std::to_string(t.mean.size()));
  }
  const int n = x.rows();
  const int d = x.cols();
  Matrix centered(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) centered.at(i, j) = x.at(i, j) - t.mean[j];
  return matmul(centered, t.components);
}

}  // namespace scda
