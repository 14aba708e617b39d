#pragma once

#include <cstddef>
#include <vector>

#include "mvp/errors.hpp"

namespace mvp {

using Index = std::size_t;

/// Dense row-major matrix of doubles. The one numeric container used for
/// images, activations, weights and feature tables alike; column vectors are
/// n-by-1, row vectors 1-by-n.
class Matrix {
 public:
  Matrix() = default;
  Matrix(Index rows, Index cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix filled(Index rows, Index cols, double value);
  static Matrix identity(Index n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(const std::vector<double>& values);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(Index r, Index c) { return data_[r * cols_ + c]; }
  double operator()(Index r, Index c) const { return data_[r * cols_ + c]; }
  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(Index r) { return data_.data() + r * cols_; }
  const double* row(Index r) const { return data_.data() + r * cols_; }

  void fill(double value);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  /// True when every entry is finite (no NaN/Inf).
  bool all_finite() const;

  bool operator==(const Matrix& other) const = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> data_;
};

// Elementwise arithmetic; shapes must agree.
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);

void add_in_place(Matrix& a, const Matrix& b);
void axpy(double alpha, const Matrix& x, Matrix& y);  // y += alpha * x
void scale_in_place(Matrix& a, double s);

double dot(const Matrix& a, const Matrix& b);
double squared_distance(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
double sum(const Matrix& a);

}  // namespace mvp
