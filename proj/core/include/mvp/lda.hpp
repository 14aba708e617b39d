#pragma once

#include <vector>

#include "mvp/matrix.hpp"

namespace mvp {

struct LdaModel {
  Matrix mean;         // global feature mean, d x 1
  Matrix projection;   // d x k, k <= #classes - 1
  Matrix class_means;  // #classes x k, projected per-class means
  std::vector<Index> class_ids;
  double lambda = 0.0;
};

// Regularized Fisher discriminant on row-sample features (n x d).  Whitening
// by (S_w + lambda*I)^(-1/2), then an eigendecomposition of the projected
// between-class scatter; lambda <= 0 selects 1e-3 * trace(S_w) / d.
LdaModel lda_fit(const Matrix& features, const std::vector<Index>& labels, double lambda = -1.0);

// Projects row-sample features into the discriminant space (n x k).
Matrix lda_project(const LdaModel& model, const Matrix& features);

}  // namespace mvp
