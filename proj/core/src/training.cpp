#include "mvp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mvp/errors.hpp"
#include "mvp/linalg.hpp"

namespace mvp {

namespace {

std::vector<Matrix*> collect_tensors(Parameters& p) {
  std::vector<Matrix*> out;
  p.for_each_tensor([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

void add_bias_columns(Matrix& m, const Matrix& b) {
  for (Index r = 0; r < m.rows(); ++r) {
    double* row = m.row(r);
    const double v = b[r];
    for (Index c = 0; c < m.cols(); ++c) row[c] += v;
  }
}

void rowsum_into(const Matrix& m, Matrix& out) {
  for (Index r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r);
    double acc = 0.0;
    for (Index c = 0; c < m.cols(); ++c) acc += row[c];
    out[r] += acc;
  }
}

void mul_sigmoid_deriv(Matrix& d, const Matrix& h) {
  for (Index i = 0; i < d.size(); ++i) d[i] *= h[i] * (1.0 - h[i]);
}

// Normalizes log-weights in place into weights; returns the argmax index
// (ties -> lowest).
Index normalize_weights(std::vector<double>& w) {
  const double lse = log_sum_exp(w);
  Index arg = 0;
  for (Index s = 0; s < w.size(); ++s) {
    if (w[s] > w[arg]) arg = s;
  }
  for (double& v : w) v = std::exp(v - lse);
  return arg;
}

// Adds scale * d(-loglik)/dTheta for one sample's trace.  delta_view is the
// unscaled head delta: (softmax - v_hat) for the discrete head, or
// (mean - target)/sigma_v^2 for the continuous one.
void backprop_sample(const TrainingPair& pair, const Parameters& p, const ForwardTrace& trace,
                     const ViewSample& sample, const Matrix& delta_view, double scale,
                     Parameters& g) {
  const Architecture& arch = p.arch;
  const Index n = arch.hidden.size();

  Matrix dv = delta_view * scale;
  Matrix dy = trace.y_mean - pair.y_hat;
  scale_in_place(dy, scale / (p.sigma_y * p.sigma_y));
  gemm_tn(p.W_y, dv, dy, 1.0, 1.0);

  const Matrix ccat = sample.concatenated(arch);
  gemm_nt(dv, trace.y_mean, g.W_y, 1.0, 1.0);
  if (!g.W_v.empty()) gemm_nt(dv, ccat, g.W_v, 1.0, 1.0);
  add_in_place(g.b_view, dv);

  gemm_nt(dy, trace.h[n - 1], g.U_out, 1.0, 1.0);
  if (!g.V_out.empty()) gemm_nt(dy, sample.codes[n - 1], g.V_out, 1.0, 1.0);
  add_in_place(g.b_out, dy);

  Matrix d(arch.hidden[n - 1].width, 1);
  gemm_tn(p.U_out, dy, d);
  for (Index l = n; l-- > 0;) {
    mul_sigmoid_deriv(d, trace.h[l]);
    const Matrix& below = l > 0 ? trace.h[l - 1] : trace.x;
    gemm_nt(d, below, g.layers[l].U, 1.0, 1.0);
    if (l > 0 && arch.hidden[l - 1].hybrid()) {
      gemm_nt(d, sample.codes[l - 1], g.layers[l].V, 1.0, 1.0);
    }
    add_in_place(g.layers[l].b, d);
    if (l > 0) {
      Matrix next(arch.hidden[l - 1].width, 1);
      gemm_tn(p.layers[l].U, d, next);
      d = std::move(next);
    }
  }
}

Matrix head_delta_supervised(const TrainingPair& pair, const Matrix& view_out,
                             const Parameters& p) {
  if (p.arch.view_head == ViewHeadKind::Discrete) {
    return softmax(view_out) - pair.view_target;
  }
  Matrix d(1, 1);
  d[0] = (view_out[0] - pair.view_target[0]) / (p.sigma_v * p.sigma_v);
  return d;
}

}  // namespace

void TrainConfig::validate() const {
  if (samples == 0) throw ContractError("train config: samples must be >= 1");
  if (learning_rate <= 0.0) throw ContractError("train config: learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ContractError("train config: momentum in [0,1)");
  if (batch_size == 0) throw ContractError("train config: batch size must be >= 1");
  if (sigma_y <= 0.0 || sigma_v <= 0.0) throw ContractError("train config: sigmas must be positive");
}

OptimizerState OptimizerState::init(const Parameters& params) {
  OptimizerState st;
  st.buffers = params.zero_clone();
  return st;
}

LossAndGrad loss_and_grad_with_samples(const TrainingPair& pair, const Parameters& params,
                                       const std::vector<ViewSample>& samples, GradMode mode) {
  if (samples.empty()) throw ContractError("loss_and_grad: need at least one sample");
  const std::vector<Matrix> prefix = extract_identity(pair.x, params);
  const Index s_count = samples.size();

  std::vector<ForwardTrace> traces(s_count);
  std::vector<double> lw(s_count);
  for (Index s = 0; s < s_count; ++s) {
    traces[s] = forward_given_sample(prefix, samples[s], params);
    traces[s].x = pair.x;
    lw[s] = recon_loglik(pair.y_hat, traces[s].y_mean, params.sigma_y) +
            view_loglik(pair.view_target, traces[s].view_out, params);
  }
  std::vector<double> w = lw;
  const Index argmax = normalize_weights(w);

  LossAndGrad out;
  out.grad = params.zero_clone();
  if (mode == GradMode::OneSample) {
    out.loss = -lw[argmax];
    const Matrix dv = head_delta_supervised(pair, traces[argmax].view_out, params);
    backprop_sample(pair, params, traces[argmax], samples[argmax], dv, w[argmax], out.grad);
  } else {
    out.loss = 0.0;
    for (Index s = 0; s < s_count; ++s) {
      out.loss += w[s] * -lw[s];
      const Matrix dv = head_delta_supervised(pair, traces[s].view_out, params);
      backprop_sample(pair, params, traces[s], samples[s], dv, w[s], out.grad);
    }
  }
  return out;
}

LossAndGrad loss_and_grad_one_sample(const TrainingPair& pair, const Parameters& params,
                                     Index s, Rng& rng) {
  const std::vector<ViewSample> samples = sample_view_codes(params.arch, s, rng);
  return loss_and_grad_with_samples(pair, params, samples, GradMode::OneSample);
}

LossAndGrad loss_and_grad_weighted(const TrainingPair& pair, const Parameters& params,
                                   Index s, Rng& rng) {
  const std::vector<ViewSample> samples = sample_view_codes(params.arch, s, rng);
  return loss_and_grad_with_samples(pair, params, samples, GradMode::WeightedAverage);
}

LossAndGrad unsupervised_with_draws(const TrainingPair& pair, double v_tilde,
                                    double sigma_vtilde, const Parameters& params,
                                    const std::vector<ViewSample>& samples,
                                    const std::vector<double>& drawn_views) {
  if (params.arch.view_head != ViewHeadKind::Continuous) {
    throw ContractError("unsupervised training requires the continuous view head");
  }
  if (sigma_vtilde <= 0.0) throw ContractError("unsupervised training: sigma_vtilde must be positive");
  if (samples.empty() || drawn_views.size() != samples.size()) {
    throw ContractError("unsupervised training: one drawn view per sample required");
  }

  const std::vector<Matrix> prefix = extract_identity(pair.x, params);
  const Index s_count = samples.size();
  std::vector<ForwardTrace> traces(s_count);
  std::vector<double> lw(s_count), obj(s_count);
  for (Index s = 0; s < s_count; ++s) {
    traces[s] = forward_given_sample(prefix, samples[s], params);
    traces[s].x = pair.x;
    const double recon = recon_loglik(pair.y_hat, traces[s].y_mean, params.sigma_y);
    const double lp_v = view_loglik_continuous(drawn_views[s], traces[s].view_out[0],
                                               params.sigma_v);
    const double lp_tilde = view_loglik_continuous(v_tilde, drawn_views[s], sigma_vtilde);
    lw[s] = recon + lp_tilde;  // w_s = p(y|h^v_s) p(v~|v_s)
    obj[s] = recon + lp_v + lp_tilde;
  }
  std::vector<double> w = lw;
  const Index argmax = normalize_weights(w);

  LossAndGrad out;
  out.grad = params.zero_clone();
  out.loss = -obj[argmax];
  Matrix dv(1, 1);
  dv[0] = (traces[argmax].view_out[0] - drawn_views[argmax]) / (params.sigma_v * params.sigma_v);
  backprop_sample(pair, params, traces[argmax], samples[argmax], dv, w[argmax], out.grad);
  return out;
}

LossAndGrad train_step_unsupervised(const TrainingPair& pair, double v_tilde,
                                    double sigma_vtilde, const Parameters& params, Index s,
                                    Rng& rng) {
  const std::vector<ViewSample> samples = sample_view_codes(params.arch, s, rng);
  const std::vector<Matrix> prefix = extract_identity(pair.x, params);
  std::vector<double> drawn(samples.size());
  for (Index i = 0; i < samples.size(); ++i) {
    const ForwardTrace trace = forward_given_sample(prefix, samples[i], params);
    drawn[i] = rng.gaussian(trace.view_out[0], params.sigma_v);
  }
  return unsupervised_with_draws(pair, v_tilde, sigma_vtilde, params, samples, drawn);
}

FrozenDraw freeze_draw(const TrainingPair& pair, const Parameters& params,
                       const std::vector<ViewSample>& samples, const Objective& objective,
                       const std::vector<double>& drawn_views) {
  FrozenDraw frozen;
  frozen.samples = samples;
  if (objective.unsupervised) {
    frozen.drawn_views = drawn_views;
    const std::vector<Matrix> prefix = extract_identity(pair.x, params);
    std::vector<double> lw(samples.size());
    for (Index s = 0; s < samples.size(); ++s) {
      const ForwardTrace trace = forward_given_sample(prefix, samples[s], params);
      lw[s] = recon_loglik(pair.y_hat, trace.y_mean, params.sigma_y) +
              view_loglik_continuous(objective.v_tilde, drawn_views[s], objective.sigma_vtilde);
    }
    frozen.weights = lw;
    frozen.argmax = normalize_weights(frozen.weights);
  } else {
    const SampleSet set = importance_weights(pair.x, pair.y_hat, pair.view_target, samples, params);
    frozen.weights = set.weights;
    frozen.argmax = set.argmax;
  }
  return frozen;
}

double frozen_objective(const TrainingPair& pair, const Parameters& params,
                        const FrozenDraw& frozen, const Objective& objective) {
  const std::vector<Matrix> prefix = extract_identity(pair.x, params);
  auto sample_term = [&](Index s) {
    const ForwardTrace trace = forward_given_sample(prefix, frozen.samples[s], params);
    const double recon = recon_loglik(pair.y_hat, trace.y_mean, params.sigma_y);
    if (objective.unsupervised) {
      return recon +
             view_loglik_continuous(frozen.drawn_views[s], trace.view_out[0], params.sigma_v) +
             view_loglik_continuous(objective.v_tilde, frozen.drawn_views[s],
                                    objective.sigma_vtilde);
    }
    return recon + view_loglik(pair.view_target, trace.view_out, params);
  };

  if (!objective.unsupervised && objective.mode == GradMode::WeightedAverage) {
    double total = 0.0;
    for (Index s = 0; s < frozen.samples.size(); ++s) {
      total += frozen.weights[s] * -sample_term(s);
    }
    return total;
  }
  return frozen.weights[frozen.argmax] * -sample_term(frozen.argmax);
}

Parameters finite_diff_gradient(const TrainingPair& pair, const Parameters& params,
                                const FrozenDraw& frozen, const Objective& objective,
                                double h) {
  if (h < 1e-7 || h > 1e-3) throw ContractError("finite_diff_gradient: h out of [1e-7, 1e-3]");
  Parameters work = params;
  Parameters grad = params.zero_clone();
  std::vector<Matrix*> wt = collect_tensors(work);
  std::vector<Matrix*> gt = collect_tensors(grad);
  for (Index t = 0; t < wt.size(); ++t) {
    for (Index i = 0; i < wt[t]->size(); ++i) {
      const double saved = (*wt[t])[i];
      (*wt[t])[i] = saved + h;
      const double fp = frozen_objective(pair, work, frozen, objective);
      (*wt[t])[i] = saved - h;
      const double fm = frozen_objective(pair, work, frozen, objective);
      (*wt[t])[i] = saved;
      (*gt[t])[i] = (fp - fm) / (2.0 * h);
    }
  }
  return grad;
}

std::vector<TensorCheck> compare_gradients(const Parameters& analytic, const Parameters& fd) {
  std::vector<TensorCheck> checks;
  std::vector<Matrix*> at = collect_tensors(const_cast<Parameters&>(analytic));
  std::vector<Matrix*> ft = collect_tensors(const_cast<Parameters&>(fd));
  std::vector<std::string> names;
  analytic.for_each_tensor([&](const std::string& n, const Matrix&) { names.push_back(n); });
  if (at.size() != ft.size()) throw DimensionError("compare_gradients: tensor count mismatch");

  for (Index t = 0; t < at.size(); ++t) {
    const Matrix& a = *at[t];
    const Matrix& f = *ft[t];
    if (!a.same_shape(f)) throw DimensionError("compare_gradients: shape mismatch in " + names[t]);
    double maxmag = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
      maxmag = std::max({maxmag, std::fabs(a[i]), std::fabs(f[i])});
    }
    TensorCheck check;
    check.name = names[t];
    for (Index i = 0; i < a.size(); ++i) {
      const double denom =
          std::max({std::fabs(a[i]), std::fabs(f[i]), 1e-3 * maxmag, 1e-12});
      check.max_rel_err = std::max(check.max_rel_err, std::fabs(a[i] - f[i]) / denom);
    }
    checks.push_back(std::move(check));
  }
  return checks;
}

void sgd_step(Parameters& params, const Parameters& grad, OptimizerState& state,
              const TrainConfig& config) {
  config.validate();
  std::vector<Matrix*> pt = collect_tensors(params);
  std::vector<Matrix*> gt = collect_tensors(const_cast<Parameters&>(grad));
  std::vector<Matrix*> bt = collect_tensors(state.buffers);
  if (pt.size() != gt.size() || pt.size() != bt.size()) {
    throw DimensionError("sgd_step: parameter/gradient/buffer tensor mismatch");
  }
  for (Index t = 0; t < pt.size(); ++t) {
    Matrix& p = *pt[t];
    const Matrix& g = *gt[t];
    Matrix& buf = *bt[t];
    if (!p.same_shape(g) || !p.same_shape(buf)) throw DimensionError("sgd_step: shape mismatch");
    for (Index i = 0; i < p.size(); ++i) {
      buf[i] = config.momentum * buf[i] + g[i];
      p[i] -= config.learning_rate * buf[i];
    }
  }
  ++state.step;
}

namespace {

struct BatchStats {
  double loss_sum = 0.0;
  double elbo_sum = 0.0;
  Index high_weight_count = 0;
  std::vector<double> max_weights;
};

// Batched forward/backward over pairs[idx[begin..end)].  Computes the mean
// gradient over the batch and per-pair statistics.  Matches the per-pair
// path numerically up to summation order.
BatchStats batch_loss_and_grad(const std::vector<TrainingPair>& pairs,
                               const std::vector<Index>& idx, Index begin, Index end,
                               const Parameters& p, const TrainConfig& cfg, Rng& rng,
                               const std::vector<double>* init_views, double sigma_vtilde,
                               Parameters& grad) {
  const Architecture& arch = p.arch;
  const Index n = arch.hidden.size();
  const Index prefix = identity_prefix_len(arch);
  const Index b_count = end - begin;
  const Index s_count = cfg.samples;
  const Index cols = b_count * s_count;
  const bool unsup = init_views != nullptr;
  const bool discrete = arch.view_head == ViewHeadKind::Discrete;
  const double inv_b = 1.0 / static_cast<double>(b_count);

  // Inputs, targets, per-pair view targets.
  Matrix x(arch.input_dim, b_count);
  Matrix y_hat(arch.output_dim, b_count);
  std::vector<double> v_scalar(b_count, 0.0);  // continuous target or v~ init
  std::vector<Index> v_class(b_count, 0);      // discrete target index
  for (Index b = 0; b < b_count; ++b) {
    const TrainingPair& pair = pairs[idx[begin + b]];
    for (Index i = 0; i < arch.input_dim; ++i) x(i, b) = pair.x[i];
    for (Index i = 0; i < arch.output_dim; ++i) y_hat(i, b) = pair.y_hat[i];
    if (unsup) {
      v_scalar[b] = (*init_views)[idx[begin + b]];
    } else if (discrete) {
      for (Index i = 0; i < pair.view_target.size(); ++i) {
        if (pair.view_target[i] == 1.0) v_class[b] = i;
      }
    } else {
      v_scalar[b] = pair.view_target[0];
    }
  }

  // Codes, drawn per pair in pair order.
  std::vector<Matrix> codes(n);
  for (Index l = 0; l < n; ++l) {
    if (arch.hidden[l].hybrid()) codes[l] = Matrix(arch.hidden[l].rand_width, cols);
  }
  for (Index b = 0; b < b_count; ++b) {
    const std::vector<ViewSample> samples = sample_view_codes(arch, s_count, rng);
    for (Index s = 0; s < s_count; ++s) {
      const Index c = b * s_count + s;
      for (Index l = 0; l < n; ++l) {
        if (!arch.hidden[l].hybrid()) continue;
        for (Index i = 0; i < arch.hidden[l].rand_width; ++i) {
          codes[l](i, c) = samples[s].codes[l](i, 0);
        }
      }
    }
  }
  const Index code_dim = arch.view_code_dim();
  Matrix ccat;
  if (code_dim > 0) {
    ccat = Matrix(code_dim, cols);
    Index at = 0;
    for (Index l = 0; l < n; ++l) {
      if (!arch.hidden[l].hybrid()) continue;
      for (Index i = 0; i < arch.hidden[l].rand_width; ++i, ++at) {
        for (Index c = 0; c < cols; ++c) ccat(at, c) = codes[l](i, c);
      }
    }
  }

  // Identity stage (one column per pair).
  std::vector<Matrix> a(prefix);
  {
    const Matrix* below = &x;
    for (Index l = 0; l < prefix; ++l) {
      a[l] = Matrix(arch.hidden[l].width, b_count);
      gemm_nn(p.layers[l].U, *below, a[l]);
      add_bias_columns(a[l], p.layers[l].b);
      sigmoid_in_place(a[l]);
      below = &a[l];
    }
  }

  // Sample stage (one column per pair-sample).
  Matrix rep(arch.hidden[prefix - 1].width, cols);
  for (Index r = 0; r < rep.rows(); ++r) {
    for (Index b = 0; b < b_count; ++b) {
      const double v = a[prefix - 1](r, b);
      for (Index s = 0; s < s_count; ++s) rep(r, b * s_count + s) = v;
    }
  }
  std::vector<Matrix> h(n);  // h[l] defined for l >= prefix
  {
    const Matrix* below = &rep;
    for (Index l = prefix; l < n; ++l) {
      h[l] = Matrix(arch.hidden[l].width, cols);
      gemm_nn(p.layers[l].U, *below, h[l]);
      if (arch.hidden[l - 1].hybrid()) gemm_nn(p.layers[l].V, codes[l - 1], h[l], 1.0, 1.0);
      add_bias_columns(h[l], p.layers[l].b);
      sigmoid_in_place(h[l]);
      below = &h[l];
    }
  }
  const Matrix& top = n > prefix ? h[n - 1] : rep;

  Matrix y(arch.output_dim, cols);
  gemm_nn(p.U_out, top, y);
  if (arch.hidden[n - 1].hybrid()) gemm_nn(p.V_out, codes[n - 1], y, 1.0, 1.0);
  add_bias_columns(y, p.b_out);

  Matrix view(arch.view_out_dim(), cols);
  gemm_nn(p.W_y, y, view);
  if (!p.W_v.empty()) gemm_nn(p.W_v, ccat, view, 1.0, 1.0);
  add_bias_columns(view, p.b_view);

  // Per-column log-likelihood terms.
  const double inv_2sy = 1.0 / (2.0 * p.sigma_y * p.sigma_y);
  const double d_log_sy = static_cast<double>(arch.output_dim) * std::log(p.sigma_y);
  std::vector<double> recon(cols), view_ll(cols), obj(cols), lw(cols);
  std::vector<double> drawn(cols, 0.0);
  for (Index c = 0; c < cols; ++c) {
    const Index b = c / s_count;
    double sq = 0.0;
    for (Index i = 0; i < arch.output_dim; ++i) {
      const double r = y_hat(i, b) - y(i, c);
      sq += r * r;
    }
    recon[c] = -d_log_sy - sq * inv_2sy;
  }
  if (unsup) {
    for (Index c = 0; c < cols; ++c) {
      drawn[c] = rng.gaussian(view(0, c), p.sigma_v);
    }
    for (Index c = 0; c < cols; ++c) {
      const Index b = c / s_count;
      const double lp_v = view_loglik_continuous(drawn[c], view(0, c), p.sigma_v);
      const double lp_tilde = view_loglik_continuous(v_scalar[b], drawn[c], sigma_vtilde);
      lw[c] = recon[c] + lp_tilde;
      obj[c] = recon[c] + lp_v + lp_tilde;
    }
  } else if (discrete) {
    for (Index c = 0; c < cols; ++c) {
      Matrix logits(arch.num_views, 1);
      for (Index j = 0; j < arch.num_views; ++j) logits[j] = view(j, c);
      view_ll[c] = log_softmax(logits)[v_class[c / s_count]];
      lw[c] = recon[c] + view_ll[c];
      obj[c] = lw[c];
    }
  } else {
    for (Index c = 0; c < cols; ++c) {
      view_ll[c] = view_loglik_continuous(v_scalar[c / s_count], view(0, c), p.sigma_v);
      lw[c] = recon[c] + view_ll[c];
      obj[c] = lw[c];
    }
  }

  // Per-pair weight normalization, loss, and column scales.
  BatchStats stats;
  const bool one_active = unsup || cfg.mode != GradMode::WeightedAverage;
  std::vector<double> scale(cols, 0.0);
  std::vector<Index> active;  // winning column per pair (one-column modes)
  if (one_active) active.reserve(b_count);
  std::vector<double> slice(s_count);
  for (Index b = 0; b < b_count; ++b) {
    for (Index s = 0; s < s_count; ++s) slice[s] = lw[b * s_count + s];
    std::vector<double> w = slice;
    const Index argmax = normalize_weights(w);
    double elbo = 0.0;
    for (Index s = 0; s < s_count; ++s) {
      elbo += w[s] * obj[b * s_count + s];
      if (w[s] > 0.9) ++stats.high_weight_count;
    }
    stats.elbo_sum += elbo;
    stats.max_weights.push_back(w[argmax]);
    if (!one_active) {
      double loss = 0.0;
      for (Index s = 0; s < s_count; ++s) {
        loss += w[s] * -obj[b * s_count + s];
        scale[b * s_count + s] = w[s] * inv_b;
      }
      stats.loss_sum += loss;
    } else {
      stats.loss_sum += -obj[b * s_count + argmax];
      scale[b * s_count + argmax] = w[argmax] * inv_b;
      active.push_back(b * s_count + argmax);
    }
  }

  // Backward pass.  Only columns with nonzero scale contribute, and in the
  // one-column modes that is one winning sample per pair, so the chain runs
  // over the compacted column set.
  const Index bw = one_active ? b_count : cols;
  std::vector<Matrix> keep;
  keep.reserve(2 * n + 4);
  auto sel_cols = [&](const Matrix& src) -> const Matrix& {
    if (!one_active) return src;
    Matrix out(src.rows(), bw);
    for (Index r = 0; r < src.rows(); ++r) {
      const double* srow = src.row(r);
      double* orow = out.row(r);
      for (Index j = 0; j < bw; ++j) orow[j] = srow[active[j]];
    }
    keep.push_back(std::move(out));
    return keep.back();
  };
  auto col_of = [&](Index j) { return one_active ? active[j] : j; };

  Matrix dv(arch.view_out_dim(), bw);
  if (discrete) {
    for (Index j = 0; j < bw; ++j) {
      const Index c = col_of(j);
      if (scale[c] == 0.0) continue;
      Matrix logits(arch.num_views, 1);
      for (Index k = 0; k < arch.num_views; ++k) logits[k] = view(k, c);
      const Matrix sm = softmax(logits);
      for (Index k = 0; k < arch.num_views; ++k) {
        dv(k, j) = scale[c] * (sm[k] - (k == v_class[c / s_count] ? 1.0 : 0.0));
      }
    }
  } else {
    const double inv_sv2 = 1.0 / (p.sigma_v * p.sigma_v);
    for (Index j = 0; j < bw; ++j) {
      const Index c = col_of(j);
      if (scale[c] == 0.0) continue;
      const double target = unsup ? drawn[c] : v_scalar[c / s_count];
      dv(0, j) = scale[c] * (view(0, c) - target) * inv_sv2;
    }
  }

  Matrix dy(arch.output_dim, bw);
  const double inv_sy2 = 1.0 / (p.sigma_y * p.sigma_y);
  for (Index j = 0; j < bw; ++j) {
    const Index c = col_of(j);
    if (scale[c] == 0.0) continue;
    const Index b = c / s_count;
    const double f = scale[c] * inv_sy2;
    for (Index i = 0; i < arch.output_dim; ++i) {
      dy(i, j) = f * (y(i, c) - y_hat(i, b));
    }
  }
  gemm_tn(p.W_y, dv, dy, 1.0, 1.0);

  gemm_nt(dv, sel_cols(y), grad.W_y, 1.0, 1.0);
  if (!grad.W_v.empty()) gemm_nt(dv, sel_cols(ccat), grad.W_v, 1.0, 1.0);
  rowsum_into(dv, grad.b_view);

  std::vector<const Matrix*> hb(n, nullptr);
  for (Index l = prefix; l < n; ++l) hb[l] = &sel_cols(h[l]);
  const Matrix& rep_b = one_active ? a[prefix - 1] : rep;
  const Matrix& top_b = n > prefix ? *hb[n - 1] : rep_b;

  gemm_nt(dy, top_b, grad.U_out, 1.0, 1.0);
  if (!grad.V_out.empty()) gemm_nt(dy, sel_cols(codes[n - 1]), grad.V_out, 1.0, 1.0);
  rowsum_into(dy, grad.b_out);

  Matrix d(arch.hidden[n - 1].width, bw);
  gemm_tn(p.U_out, dy, d);
  for (Index l = n; l-- > prefix;) {
    mul_sigmoid_deriv(d, *hb[l]);
    const Matrix& below = l > prefix ? *hb[l - 1] : rep_b;
    gemm_nt(d, below, grad.layers[l].U, 1.0, 1.0);
    if (arch.hidden[l - 1].hybrid()) {
      gemm_nt(d, sel_cols(codes[l - 1]), grad.layers[l].V, 1.0, 1.0);
    }
    rowsum_into(d, grad.layers[l].b);
    Matrix next(arch.hidden[l - 1].width, bw);
    gemm_tn(p.layers[l].U, d, next);
    d = std::move(next);
  }

  // Collapse sample columns back to one column per pair (the compacted set
  // already holds exactly one).
  Matrix dp;
  if (one_active) {
    dp = std::move(d);
  } else {
    dp = Matrix(arch.hidden[prefix - 1].width, b_count);
    for (Index r = 0; r < dp.rows(); ++r) {
      for (Index b = 0; b < b_count; ++b) {
        double acc = 0.0;
        for (Index s = 0; s < s_count; ++s) acc += d(r, b * s_count + s);
        dp(r, b) = acc;
      }
    }
  }
  for (Index l = prefix; l-- > 0;) {
    mul_sigmoid_deriv(dp, a[l]);
    const Matrix& below = l > 0 ? a[l - 1] : x;
    gemm_nt(dp, below, grad.layers[l].U, 1.0, 1.0);
    rowsum_into(dp, grad.layers[l].b);
    if (l > 0) {
      Matrix next(arch.hidden[l - 1].width, b_count);
      gemm_tn(p.layers[l].U, dp, next);
      dp = std::move(next);
    }
  }
  return stats;
}

}  // namespace

EpochMetrics train_epoch(const std::vector<TrainingPair>& pairs, Parameters& params,
                         OptimizerState& state, const TrainConfig& config, Rng& rng,
                         const std::vector<double>* init_views, double sigma_vtilde) {
  config.validate();
  if (pairs.empty()) throw ContractError("train_epoch: empty dataset");
  if (init_views != nullptr) {
    if (params.arch.view_head != ViewHeadKind::Continuous) {
      throw ContractError("train_epoch: unsupervised mode requires the continuous view head");
    }
    if (init_views->size() != pairs.size()) {
      throw ContractError("train_epoch: one view initialization per pair required");
    }
    if (sigma_vtilde <= 0.0) throw ContractError("train_epoch: sigma_vtilde must be positive");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const Index count = pairs.size();
  std::vector<Index> idx(count);
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = count; i-- > 1;) {
    const Index j = rng.uniform_index(i + 1);
    std::swap(idx[i], idx[j]);
  }

  EpochMetrics metrics;
  double loss_sum = 0.0, elbo_sum = 0.0, maxw_sum = 0.0;
  Index high_count = 0;
  std::vector<double> max_weights;
  max_weights.reserve(count);

  for (Index begin = 0; begin < count; begin += config.batch_size) {
    const Index end = std::min(count, begin + config.batch_size);
    Parameters grad = params.zero_clone();
    const BatchStats stats = batch_loss_and_grad(pairs, idx, begin, end, params, config, rng,
                                                 init_views, sigma_vtilde, grad);
    sgd_step(params, grad, state, config);
    loss_sum += stats.loss_sum;
    elbo_sum += stats.elbo_sum;
    high_count += stats.high_weight_count;
    for (double w : stats.max_weights) {
      max_weights.push_back(w);
      maxw_sum += w;
    }
  }

  std::sort(max_weights.begin(), max_weights.end());
  const double n = static_cast<double>(count);
  metrics.mean_loss = loss_sum / n;
  metrics.elbo_estimate = elbo_sum / n;
  metrics.max_weight_mean = maxw_sum / n;
  metrics.max_weight_median =
      count % 2 == 1 ? max_weights[count / 2]
                     : 0.5 * (max_weights[count / 2 - 1] + max_weights[count / 2]);
  metrics.weight_sparsity_fraction =
      static_cast<double>(high_count) / (n * static_cast<double>(config.samples));
  metrics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return metrics;
}

std::vector<double> cluster_init_views(const std::vector<Matrix>& targets, Index k, Rng& rng) {
  const Index count = targets.size();
  if (k < 2) throw ContractError("cluster_init_views: need at least 2 clusters");
  if (k > count) throw ContractError("cluster_init_views: more clusters than targets");
  const Index dim = targets[0].size();
  for (const Matrix& t : targets) {
    if (t.size() != dim) throw DimensionError("cluster_init_views: ragged targets");
  }

  // Seeded initialization from k pairwise-distinct targets.
  std::vector<Matrix> centroids;
  for (Index attempt = 0; attempt < 1000 * k && centroids.size() < k; ++attempt) {
    const Matrix& cand = targets[rng.uniform_index(count)];
    bool fresh = true;
    for (const Matrix& c : centroids) {
      if (squared_distance(c, cand) == 0.0) {
        fresh = false;
        break;
      }
    }
    if (fresh) centroids.push_back(cand);
  }
  if (centroids.size() < k) {
    throw ContractError("cluster_init_views: fewer than k distinct targets");
  }

  std::vector<Index> assign(count, 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (Index i = 0; i < count; ++i) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        const double d = squared_distance(targets[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<Index> sizes(k, 0);
    for (Index c = 0; c < k; ++c) centroids[c].fill(0.0);
    for (Index i = 0; i < count; ++i) {
      add_in_place(centroids[assign[i]], targets[i]);
      ++sizes[assign[i]];
    }
    for (Index c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        scale_in_place(centroids[c], 1.0 / static_cast<double>(sizes[c]));
      } else {
        // Re-seed an empty cluster with the point farthest from its centroid.
        Index far = 0;
        double far_d = -1.0;
        for (Index i = 0; i < count; ++i) {
          const double d = squared_distance(targets[i], centroids[assign[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids[c] = targets[far];
      }
    }
  }

  // Order clusters by the horizontal intensity centroid of their mean image.
  const Index side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(dim))));
  const Index width = side * side == dim ? side : dim;
  std::vector<double> cx(k, 0.0);
  for (Index c = 0; c < k; ++c) {
    double wsum = 0.0, xsum = 0.0;
    for (Index i = 0; i < dim; ++i) {
      const double w = std::max(centroids[c][i], 0.0);
      wsum += w;
      xsum += w * static_cast<double>(i % width);
    }
    cx[c] = wsum > 0.0 ? xsum / wsum : 0.0;
  }
  std::vector<Index> order(k);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index i, Index j) { return cx[i] < cx[j]; });
  std::vector<double> cluster_value(k, 0.0);
  for (Index rank = 0; rank < k; ++rank) {
    cluster_value[order[rank]] =
        k == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(rank) / static_cast<double>(k - 1);
  }

  std::vector<double> out(count);
  for (Index i = 0; i < count; ++i) out[i] = cluster_value[assign[i]];
  return out;
}

void write_metrics_header(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open metrics file: " + path);
  f << "epoch,mean_loss,elbo_estimate,max_weight_median,weight_sparsity_fraction,wall_seconds\n";
}

void append_metrics_row(const std::string& path, const EpochMetrics& m) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot open metrics file: " + path);
  char line[256];
  std::snprintf(line, sizeof(line), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                static_cast<std::size_t>(m.epoch), m.mean_loss, m.elbo_estimate,
                m.max_weight_median, m.weight_sparsity_fraction, m.wall_seconds);
  f << line;
}

std::vector<EpochMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open metrics file: " + path);
  std::vector<EpochMetrics> rows;
  std::string line;
  Index line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    EpochMetrics m;
    std::size_t epoch = 0;
    const int got = std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf", &epoch, &m.mean_loss,
                                &m.elbo_estimate, &m.max_weight_median,
                                &m.weight_sparsity_fraction, &m.wall_seconds);
    if (got != 6) {
      throw ParseError("metrics csv: malformed row at line " + std::to_string(line_no));
    }
    m.epoch = epoch;
    rows.push_back(m);
  }
  return rows;
}

}  // namespace mvp
