#include "mvp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

void check_gemm_dims(Index m, Index k, Index kb, Index n, const Matrix& c, const char* op) {
  if (k != kb) {
    throw DimensionError(std::string(op) + ": inner dimension mismatch " + std::to_string(k) +
                         " vs " + std::to_string(kb));
  }
  if (c.rows() != m || c.cols() != n) {
    throw DimensionError(std::string(op) + ": output shape " + std::to_string(c.rows()) + "x" +
                         std::to_string(c.cols()) + ", expected " + std::to_string(m) + "x" +
                         std::to_string(n));
  }
}

void apply_beta(Matrix& c, double beta) {
  if (beta == 0.0) {
    c.fill(0.0);
  } else if (beta != 1.0) {
    scale_in_place(c, beta);
  }
}

constexpr Index kRowTile = 4;    // C rows per register tile
constexpr Index kColTile = 16;   // C columns per register tile (two vectors)
constexpr Index kRowPanel = 128; // A panel kept cache-resident across column tiles

// 4x16 register-tile kernels: the accumulator block lives in registers for
// the whole k loop, so C is touched once and each loaded B vector feeds four
// rows of fused multiply-adds. Summation order over p is fixed, keeping
// results bit-reproducible across runs.
inline void tile_4x16(const double* a0, const double* a1, const double* a2, const double* a3,
                      const double* bp, Index ldb, Index k, double alpha, Matrix& c, Index i,
                      Index j0) {
  double t[kRowTile][kColTile] = {};
  for (Index p = 0; p < k; ++p, bp += ldb) {
    for (Index jj = 0; jj < kColTile; ++jj) {
      const double bv = bp[jj];
      t[0][jj] += a0[p] * bv;
      t[1][jj] += a1[p] * bv;
      t[2][jj] += a2[p] * bv;
      t[3][jj] += a3[p] * bv;
    }
  }
  for (Index ii = 0; ii < kRowTile; ++ii) {
    double* crow = c.row(i + ii) + j0;
    for (Index jj = 0; jj < kColTile; ++jj) crow[jj] += alpha * t[ii][jj];
  }
}

inline void tile_1x16(const double* arow, const double* bp, Index ldb, Index k, double alpha,
                      Matrix& c, Index i, Index j0) {
  double t[kColTile] = {};
  for (Index p = 0; p < k; ++p, bp += ldb) {
    const double av = arow[p];
    for (Index jj = 0; jj < kColTile; ++jj) t[jj] += av * bp[jj];
  }
  double* crow = c.row(i) + j0;
  for (Index jj = 0; jj < kColTile; ++jj) crow[jj] += alpha * t[jj];
}

// Core C += alpha * A * B for row-major A (m x k) and B (k x n), beta already
// applied by the caller.
void gemm_core_nn(const Matrix& a, const Matrix& b, Matrix& c, double alpha) {
  const Index m = a.rows(), k = a.cols(), n = b.cols();

  if (n == 1) {  // matrix-vector product: independent lanes break the FMA chain
    const double* bp = b.data();
    for (Index i = 0; i < m; ++i) {
      const double* arow = a.row(i);
      double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
      Index p = 0;
      for (; p + 4 <= k; p += 4) {
        a0 += arow[p] * bp[p];
        a1 += arow[p + 1] * bp[p + 1];
        a2 += arow[p + 2] * bp[p + 2];
        a3 += arow[p + 3] * bp[p + 3];
      }
      for (; p < k; ++p) a0 += arow[p] * bp[p];
      c[i] += alpha * ((a0 + a1) + (a2 + a3));
    }
    return;
  }

  const Index j_full = n - n % kColTile;
  for (Index ip = 0; ip < m; ip += kRowPanel) {
    const Index ip1 = std::min(m, ip + kRowPanel);
    for (Index j0 = 0; j0 < j_full; j0 += kColTile) {
      Index i = ip;
      for (; i + kRowTile <= ip1; i += kRowTile) {
        tile_4x16(a.row(i), a.row(i + 1), a.row(i + 2), a.row(i + 3), b.data() + j0, n, k,
                  alpha, c, i, j0);
      }
      for (; i < ip1; ++i) tile_1x16(a.row(i), b.data() + j0, n, k, alpha, c, i, j0);
    }
    if (j_full < n) {  // trailing columns via plain row updates
      for (Index i = ip; i < ip1; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (Index p = 0; p < k; ++p) {
          const double s = alpha * arow[p];
          if (s == 0.0) continue;
          const double* brow = b.row(p);
          for (Index j = j_full; j < n; ++j) crow[j] += s * brow[j];
        }
      }
    }
  }
}

}  // namespace

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, double alpha, double beta) {
  const Index m = a.rows(), k = a.cols(), n = b.cols();
  check_gemm_dims(m, k, b.rows(), n, c, "gemm_nn");
  apply_beta(c, beta);
  if (alpha == 0.0 || m == 0 || n == 0 || k == 0) return;
  gemm_core_nn(a, b, c, alpha);
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, double alpha, double beta) {
  const Index m = a.rows(), k = a.cols(), n = b.rows();
  check_gemm_dims(m, k, b.cols(), n, c, "gemm_nt");
  apply_beta(c, beta);
  if (alpha == 0.0 || m == 0 || n == 0 || k == 0) return;

  // Dot products along rows of B do not vectorize without reassociation, so
  // sizeable products go through the tiled core on an explicit transpose.
  if (m >= kRowTile && n >= kColTile) {
    gemm_core_nn(a, transpose(b), c, alpha);
    return;
  }
  for (Index i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (Index j = 0; j < n; ++j) {
      const double* brow = b.row(j);
      double t0 = 0.0, t1 = 0.0, t2 = 0.0, t3 = 0.0;
      Index p = 0;
      for (; p + 4 <= k; p += 4) {
        t0 += arow[p] * brow[p];
        t1 += arow[p + 1] * brow[p + 1];
        t2 += arow[p + 2] * brow[p + 2];
        t3 += arow[p + 3] * brow[p + 3];
      }
      for (; p < k; ++p) t0 += arow[p] * brow[p];
      crow[j] += alpha * ((t0 + t1) + (t2 + t3));
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, double alpha, double beta) {
  const Index k = a.rows(), m = a.cols(), n = b.cols();
  check_gemm_dims(m, k, b.rows(), n, c, "gemm_tn");
  apply_beta(c, beta);
  if (alpha == 0.0 || m == 0 || n == 0 || k == 0) return;

  const Index j_full = n - n % kColTile;
  for (Index ip = 0; ip < m; ip += kRowPanel) {
    const Index ip1 = std::min(m, ip + kRowPanel);
    for (Index j0 = 0; j0 < j_full; j0 += kColTile) {
      Index i = ip;
      for (; i + kRowTile <= ip1; i += kRowTile) {
        const double* ap = a.data() + i;  // walks column block of A, quad per step
        const double* bp = b.data() + j0;
        double t[kRowTile][kColTile] = {};
        for (Index p = 0; p < k; ++p, ap += m, bp += n) {
          for (Index jj = 0; jj < kColTile; ++jj) {
            const double bv = bp[jj];
            t[0][jj] += ap[0] * bv;
            t[1][jj] += ap[1] * bv;
            t[2][jj] += ap[2] * bv;
            t[3][jj] += ap[3] * bv;
          }
        }
        for (Index ii = 0; ii < kRowTile; ++ii) {
          double* crow = c.row(i + ii) + j0;
          for (Index jj = 0; jj < kColTile; ++jj) crow[jj] += alpha * t[ii][jj];
        }
      }
      for (; i < ip1; ++i) {
        const double* ap = a.data() + i;
        const double* bp = b.data() + j0;
        double t[kColTile] = {};
        for (Index p = 0; p < k; ++p, ap += m, bp += n) {
          const double av = ap[0];
          for (Index jj = 0; jj < kColTile; ++jj) t[jj] += av * bp[jj];
        }
        double* crow = c.row(i) + j0;
        for (Index jj = 0; jj < kColTile; ++jj) crow[jj] += alpha * t[jj];
      }
    }
    if (j_full < n) {
      for (Index i = ip; i < ip1; ++i) {
        double* crow = c.row(i);
        for (Index p = 0; p < k; ++p) {
          const double s = alpha * a.row(p)[i];
          if (s == 0.0) continue;
          const double* brow = b.row(p);
          for (Index j = j_full; j < n; ++j) crow[j] += s * brow[j];
        }
      }
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  gemm_nn(a, b, c);
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& z) {
  Matrix out = z;
  sigmoid_in_place(out);
  return out;
}

void sigmoid_in_place(Matrix& m) {
  for (Index i = 0; i < m.size(); ++i) m[i] = sigmoid(m[i]);
}

Matrix sigmoid_derivative_from_activation(const Matrix& s) {
  Matrix d = s;
  for (Index i = 0; i < d.size(); ++i) d[i] = s[i] * (1.0 - s[i]);
  return d;
}

Matrix softmax(const Matrix& logits) {
  if (logits.size() == 0) throw DimensionError("softmax: empty input");
  Matrix out = logits;
  double mx = out[0];
  for (Index i = 1; i < out.size(); ++i) mx = std::max(mx, out[i]);
  double z = 0.0;
  for (Index i = 0; i < out.size(); ++i) {
    out[i] = std::exp(out[i] - mx);
    z += out[i];
  }
  scale_in_place(out, 1.0 / z);
  return out;
}

Matrix log_softmax(const Matrix& logits) {
  if (logits.size() == 0) throw DimensionError("log_softmax: empty input");
  Matrix out = logits;
  double mx = out[0];
  for (Index i = 1; i < out.size(); ++i) mx = std::max(mx, out[i]);
  double z = 0.0;
  for (Index i = 0; i < out.size(); ++i) z += std::exp(out[i] - mx);
  const double lz = mx + std::log(z);
  for (Index i = 0; i < out.size(); ++i) out[i] -= lz;
  return out;
}

double log_sum_exp(const std::vector<double>& xs) {
  if (xs.empty()) throw DimensionError("log_sum_exp: empty input");
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;  // all -inf (or a nan) propagates
  double z = 0.0;
  for (double x : xs) z += std::exp(x - mx);
  return mx + std::log(z);
}

EighResult sym_eigh(const Matrix& a) {
  const Index n = a.rows();
  if (a.cols() != n) throw DimensionError("sym_eigh: matrix must be square");
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (std::fabs(a(i, j) - a(j, i)) > 1e-10)
        throw ContractError("sym_eigh: input is not symmetric");

  Matrix d = a;                     // working copy, driven to diagonal form
  Matrix qt = Matrix::identity(n);  // eigenvectors as rows; transposed at the end
  std::vector<double> old_p(n), old_q(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) s += d(i, j) * d(i, j);
    return std::sqrt(2.0 * s);
  };

  // Sweep threshold is relative to the input magnitude; an absolute cutoff
  // would never be met for large-scale scatter matrices and every call would
  // burn the full sweep budget.
  double frob = 0.0;
  for (Index i = 0; i < n * n; ++i) frob += a[i] * a[i];
  const double tol = 1e-12 * std::max(1.0, std::sqrt(frob));

  for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index qi = p + 1; qi < n; ++qi) {
        const double apq = d(p, qi);
        if (std::fabs(apq) <= 1e-300) continue;
        const double app = d(p, p);
        const double aqq = d(qi, qi);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * cs;

        // Two-sided rotation using symmetry: the new rows p and q double as
        // the new columns, so every hot read stays contiguous.
        double* rp = d.row(p);
        double* rq = d.row(qi);
        std::copy(rp, rp + n, old_p.begin());
        std::copy(rq, rq + n, old_q.begin());
        for (Index k = 0; k < n; ++k) {
          rp[k] = cs * old_p[k] - sn * old_q[k];
          rq[k] = sn * old_p[k] + cs * old_q[k];
        }
        rp[p] = cs * cs * app - 2.0 * sn * cs * apq + sn * sn * aqq;
        rq[qi] = sn * sn * app + 2.0 * sn * cs * apq + cs * cs * aqq;
        rp[qi] = 0.0;  // annihilated by construction
        rq[p] = 0.0;
        for (Index k = 0; k < n; ++k) {
          if (k == p || k == qi) continue;
          d(k, p) = rp[k];
          d(k, qi) = rq[k];
        }

        double* vp = qt.row(p);
        double* vq = qt.row(qi);
        for (Index k = 0; k < n; ++k) {
          const double qpk = vp[k];
          const double qqk = vq[k];
          vp[k] = cs * qpk - sn * qqk;
          vq[k] = sn * qpk + cs * qqk;
        }
      }
    }
  }

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index i, Index j) { return d(i, i) > d(j, j); });

  EighResult out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (Index c = 0; c < n; ++c) {
    out.values[c] = d(order[c], order[c]);
    for (Index r = 0; r < n; ++r) out.vectors(r, c) = qt(order[c], r);
  }
  return out;
}

}  // namespace mvp
