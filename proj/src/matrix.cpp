#include "scda/matrix.hpp"

#include <cmath>
#include <string>

#include "scda/error.hpp"
#include "scda/kernels.hpp"

namespace scda {

namespace {

void check_positive_dims(int rows, int cols) {
  if (rows < 0 || cols < 0)
    throw ShapeError("matrix dimensions must be non-negative, got " + std::to_string(rows) +
                     "x" + std::to_string(cols));
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
  check_positive_dims(rows, cols);
  data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix::Matrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_positive_dims(rows, cols);
  if (data_.size() != static_cast<std::size_t>(rows) * cols)
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match shape " + std::to_string(rows) + "x" +
                     std::to_string(cols));
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

void Matrix::fill(double value) {
  for (double& v : data_) v = value;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul shape mismatch: " + shape_str(a) + " * " + shape_str(b));
  Matrix out(a.rows(), b.cols());
  kernels::matmul(a.data(), a.rows(), a.cols(), b.data(), b.cols(), out.data());
  return out;
}

Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_transpose_a shape mismatch: " + shape_str(a) + "ᵀ * " +
                     shape_str(b));
  Matrix out(a.cols(), b.cols());
  kernels::matmul_at_b(a.data(), a.rows(), a.cols(), b.data(), b.cols(), out.data());
  return out;
}

Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_transpose_b shape mismatch: " + shape_str(a) + " * " +
                     shape_str(b) + "ᵀ");
  Matrix out(a.rows(), b.rows());
  kernels::matmul_a_bt(a.data(), a.rows(), a.cols(), b.data(), b.rows(), out.data());
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw ShapeError("add shape mismatch: " + shape_str(a) + " + " + shape_str(b));
  double* pa = a.data();
  const double* pb = b.data();
  for (long long i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void scale_inplace(Matrix& a, double s) {
  for (double& v : a.values()) v *= s;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.cols() != b.cols())
    throw ShapeError("vstack column mismatch: " + shape_str(a) + " over " + shape_str(b));
  Matrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(a.values().size()));
  return out;
}

Matrix take_rows(const Matrix& a, std::span<const int> indices) {
  Matrix out(static_cast<int>(indices.size()), a.cols());
  for (int i = 0; i < out.rows(); ++i) {
    const int src = indices[static_cast<std::size_t>(i)];
    if (src < 0 || src >= a.rows())
      throw ContractViolation("take_rows index " + std::to_string(src) + " out of range");
    auto in = a.row(src);
    std::copy(in.begin(), in.end(), out.row(i).begin());
  }
  return out;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
  return best;
}

void require_finite(const Matrix& m, const char* context) {
  if (!m.all_finite())
    throw NumericalError(std::string("non-finite values in ") + context);
}

}  // namespace scda
