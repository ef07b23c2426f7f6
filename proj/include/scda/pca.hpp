#pragma once

#include <vector>

#include "scda/matrix.hpp"

namespace scda {

/// Fitted linear projection onto the top principal components.
struct PcaTransform {
  std::vector<double> mean;  // input-space mean, size d_in
  Matrix components;         // d_in x d_out, columns are unit eigenvectors
  std::vector<double> eigenvalues;  // descending, size d_out
  int d_out = 0;
  // Set when the data had (numerically) zero variance; the projection is
  // still valid but every output coordinate is ~0.
  bool zero_variance = false;
};

/// Fits PCA on the rows of `x`. Keeps min(d_out, d_in) components, ordered
/// by descending eigenvalue of the sample covariance (1/(n-1) normalization,
/// or the zero matrix when n == 1). Eigen-decomposition is a cyclic Jacobi
/// sweep; each component's sign is fixed so its largest-magnitude entry is
/// positive (lowest index on ties).
PcaTransform fit_pca(const Matrix& x, int d_out);

/// Projects rows of `x` with a fitted transform: (x - mean) * components.
Matrix apply_pca(const PcaTransform& t, const Matrix& x);

/// Symmetric eigendecomposition by cyclic Jacobi rotations. `a` must be
/// square and symmetric. Returns eigenvalues in descending order and the
/// matching eigenvectors as columns of `vectors`.
void symmetric_eigen(const Matrix& a, std::vector<double>& values,
                     Matrix& vectors);

}  // namespace scda
