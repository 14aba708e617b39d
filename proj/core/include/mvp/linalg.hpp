#pragma once

#include <vector>

#include "mvp/matrix.hpp"

namespace mvp {

// C = alpha * A * B + beta * C            (A: m x k, B: k x n, C: m x n)
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, double alpha = 1.0, double beta = 0.0);
// C = alpha * A * B^T + beta * C          (A: m x k, B: n x k, C: m x n)
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, double alpha = 1.0, double beta = 0.0);
// C = alpha * A^T * B + beta * C          (A: k x m, B: k x n, C: m x n)
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, double alpha = 1.0, double beta = 0.0);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

double sigmoid(double x);
Matrix sigmoid(const Matrix& z);
void sigmoid_in_place(Matrix& m);
// d/dx sigmoid = s * (1 - s) applied to an already-activated matrix.
Matrix sigmoid_derivative_from_activation(const Matrix& s);

// Stable softmax / log-softmax over every entry of the input (used on logit
// column vectors).
Matrix softmax(const Matrix& logits);
Matrix log_softmax(const Matrix& logits);
double log_sum_exp(const std::vector<double>& xs);

struct EighResult {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

// Cyclic Jacobi eigensolver for symmetric matrices.  Requires
// max|A - A^T| <= 1e-10; converges to off-diagonal norm below 1e-12 with a
// 100-sweep cap.
EighResult sym_eigh(const Matrix& a);

}  // namespace mvp
