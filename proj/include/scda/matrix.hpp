#pragma once

#include <span>
#include <vector>

namespace scda {

/// Dense row-major matrix of 64-bit floats. Value type; cheap to move.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols);  // zero-filled
  Matrix(int rows, int cols, std::vector<double> data);

  static Matrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  long long size() const { return 1LL * rows_ * cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<double> row(int r) {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without forming the transpose.
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);
/// a·bᵀ without forming the transpose.
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

void add_inplace(Matrix& a, const Matrix& b);
void scale_inplace(Matrix& a, double s);

/// Stacks b below a (must agree on cols).
Matrix vstack(const Matrix& a, const Matrix& b);
/// New matrix from the given rows of a, in the given order.
Matrix take_rows(const Matrix& a, std::span<const int> indices);

/// Index of the largest value; ties resolve to the lowest index.
int argmax(std::span<const double> values);

/// Throws NumericalError mentioning `context` if any entry is non-finite.
void require_finite(const Matrix& m, const char* context);

}  // namespace scda
