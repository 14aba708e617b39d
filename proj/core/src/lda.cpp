#include "mvp/lda.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mvp/errors.hpp"
#include "mvp/linalg.hpp"

namespace mvp {

namespace {

// scatter += sum_i (row_i - mu)^T (row_i - mu) over the given rows.
void accumulate_scatter(Matrix& scatter, const Matrix& features, const std::vector<Index>& rows,
                        const Matrix& mu) {
  const Index d = features.cols();
  Matrix diff(1, d);
  for (Index r : rows) {
    const double* x = features.row(r);
    for (Index j = 0; j < d; ++j) diff[j] = x[j] - mu[j];
    gemm_tn(diff, diff, scatter, 1.0, 1.0);
  }
}

}  // namespace

LdaModel lda_fit(const Matrix& features, const std::vector<Index>& labels, double lambda) {
  const Index n = features.rows();
  const Index d = features.cols();
  if (n == 0 || d == 0) throw ContractError("lda_fit: empty feature matrix");
  if (labels.size() != n) {
    throw ContractError("lda_fit: label count does not match feature rows");
  }

  std::map<Index, std::vector<Index>> by_class;
  for (Index i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  const Index c = by_class.size();
  if (c < 2) throw ContractError("lda_fit: need at least 2 classes");
  for (const auto& [id, rows] : by_class) {
    if (rows.size() < 2) {
      throw ContractError("lda_fit: class " + std::to_string(id) + " has fewer than 2 samples");
    }
  }

  Matrix global_mean(d, 1);
  for (Index i = 0; i < n; ++i) {
    const double* x = features.row(i);
    for (Index j = 0; j < d; ++j) global_mean[j] += x[j];
  }
  scale_in_place(global_mean, 1.0 / static_cast<double>(n));

  std::vector<Index> class_ids;
  std::vector<Matrix> mus;  // 1 x d rows
  class_ids.reserve(c);
  mus.reserve(c);
  Matrix s_w(d, d);
  Matrix s_b(d, d);
  for (const auto& [id, rows] : by_class) {
    Matrix mu(1, d);
    for (Index r : rows) {
      const double* x = features.row(r);
      for (Index j = 0; j < d; ++j) mu[j] += x[j];
    }
    scale_in_place(mu, 1.0 / static_cast<double>(rows.size()));
    accumulate_scatter(s_w, features, rows, mu);

    Matrix centered(1, d);
    for (Index j = 0; j < d; ++j) centered[j] = mu[j] - global_mean[j];
    gemm_tn(centered, centered, s_b, static_cast<double>(rows.size()), 1.0);

    class_ids.push_back(id);
    mus.push_back(std::move(mu));
  }

  double trace = 0.0;
  for (Index j = 0; j < d; ++j) trace += s_w(j, j);
  if (!(lambda > 0.0)) {
    lambda = trace > 0.0 ? 1e-3 * trace / static_cast<double>(d) : 1e-3;
  }
  for (Index j = 0; j < d; ++j) s_w(j, j) += lambda;

  const EighResult within = sym_eigh(s_w);
  for (double value : within.values) {
    if (!(value > 0.0)) {
      throw ContractError("lda_fit: within-class scatter is singular; increase lambda");
    }
  }
  // T = Q diag(values^-1/2) Q^T, the symmetric inverse square root.
  Matrix scaled = within.vectors;
  for (Index jc = 0; jc < scaled.cols(); ++jc) {
    const double inv_sqrt = 1.0 / std::sqrt(within.values[jc]);
    for (Index r = 0; r < d; ++r) scaled(r, jc) *= inv_sqrt;
  }
  Matrix t(d, d);
  gemm_nt(scaled, within.vectors, t);

  Matrix tmp(d, d);
  gemm_nn(t, s_b, tmp);
  Matrix projected_sb(d, d);
  gemm_nn(tmp, t, projected_sb);
  for (Index r = 0; r < d; ++r) {  // symmetrize away rounding noise
    for (Index jc = r + 1; jc < d; ++jc) {
      const double avg = 0.5 * (projected_sb(r, jc) + projected_sb(jc, r));
      projected_sb(r, jc) = avg;
      projected_sb(jc, r) = avg;
    }
  }

  const EighResult between = sym_eigh(projected_sb);
  const Index k = std::min<Index>(c - 1, d);
  Matrix top(d, k);
  for (Index r = 0; r < d; ++r) {
    for (Index jc = 0; jc < k; ++jc) top(r, jc) = between.vectors(r, jc);
  }

  LdaModel model;
  model.mean = global_mean;
  model.projection = Matrix(d, k);
  gemm_nn(t, top, model.projection);
  model.class_ids = std::move(class_ids);
  model.lambda = lambda;

  Matrix mu_rows(c, d);
  for (Index ci = 0; ci < c; ++ci) {
    for (Index j = 0; j < d; ++j) mu_rows(ci, j) = mus[ci][j];
  }
  model.class_means = lda_project(model, mu_rows);
  return model;
}

Matrix lda_project(const LdaModel& model, const Matrix& features) {
  const Index d = model.projection.rows();
  if (features.cols() != d) {
    throw DimensionError("lda_project: expected " + std::to_string(d) + " feature columns, got " +
                         std::to_string(features.cols()));
  }
  Matrix centered = features;
  for (Index r = 0; r < centered.rows(); ++r) {
    double* x = centered.row(r);
    for (Index j = 0; j < d; ++j) x[j] -= model.mean[j];
  }
  Matrix out(features.rows(), model.projection.cols());
  gemm_nn(centered, model.projection, out);
  return out;
}

}  // namespace mvp
