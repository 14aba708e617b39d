#include "mvp/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mvp/errors.hpp"
#include "mvp/linalg.hpp"

namespace mvp {

namespace {

void validate_sample(const Architecture& arch, const ViewSample& sample) {
  if (sample.codes.size() != arch.hidden.size()) {
    throw DimensionError("view sample: expected one code slot per hidden layer");
  }
  for (Index l = 0; l < arch.hidden.size(); ++l) {
    const Index want = arch.hidden[l].rand_width;
    const Matrix& c = sample.codes[l];
    if (want == 0) {
      if (!c.empty()) throw DimensionError("view sample: code on deterministic layer");
    } else if (c.rows() != want || c.cols() != 1) {
      throw DimensionError("view sample: code dim mismatch at layer " + std::to_string(l + 1));
    }
  }
}

bool is_one_hot(const Matrix& v) {
  Index ones = 0;
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0) {
      ++ones;
    } else if (v[i] != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

Index discrete_label_index(double label, Index m) {
  const double r = std::round(label);
  if (std::fabs(label - r) > 1e-9 || r < 0.0 || r >= static_cast<double>(m)) {
    throw ContractError("discrete view label must be an integer in [0, M)");
  }
  return static_cast<Index>(r);
}

Matrix view_head_output(const Matrix& y, const Matrix& concat_codes, const Parameters& p) {
  Matrix out = p.b_view;
  gemm_nn(p.W_y, y, out, 1.0, 1.0);
  if (!p.W_v.empty()) gemm_nn(p.W_v, concat_codes, out, 1.0, 1.0);
  return out;
}

}  // namespace

Matrix ViewSample::concatenated(const Architecture& arch) const {
  const Index total = arch.view_code_dim();
  if (total == 0) return Matrix();
  Matrix out(total, 1);
  Index at = 0;
  for (Index l = 0; l < codes.size(); ++l) {
    for (Index i = 0; i < codes[l].size(); ++i) out[at++] = codes[l][i];
  }
  return out;
}

Index identity_prefix_len(const Architecture& arch) {
  Index p = 1;
  while (p < arch.hidden.size() && !arch.hidden[p - 1].hybrid()) ++p;
  return p;
}

std::vector<Matrix> extract_identity(const Matrix& x, const Parameters& params) {
  const Architecture& arch = params.arch;
  if (x.rows() != arch.input_dim || x.cols() != 1) {
    throw DimensionError("extract_identity: input must be a " +
                         std::to_string(arch.input_dim) + "-dim column");
  }
  const Index prefix = identity_prefix_len(arch);
  std::vector<Matrix> h;
  h.reserve(prefix);
  const Matrix* prev = &x;
  for (Index l = 0; l < prefix; ++l) {
    Matrix z = params.layers[l].b;
    gemm_nn(params.layers[l].U, *prev, z, 1.0, 1.0);
    sigmoid_in_place(z);
    h.push_back(std::move(z));
    prev = &h.back();
  }
  return h;
}

std::vector<ViewSample> sample_view_codes(const Architecture& arch, Index s, Rng& rng) {
  if (s == 0) throw ContractError("sample_view_codes: need at least one sample");
  std::vector<ViewSample> samples(s);
  for (Index i = 0; i < s; ++i) {
    samples[i].codes.resize(arch.hidden.size());
    for (Index l = 0; l < arch.hidden.size(); ++l) {
      if (arch.hidden[l].hybrid()) {
        samples[i].codes[l] = Matrix(arch.hidden[l].rand_width, 1);
        rng.fill_uniform(samples[i].codes[l], 0.0, 1.0);
      }
    }
  }
  return samples;
}

ForwardTrace forward_given_sample(const std::vector<Matrix>& identity_prefix,
                                  const ViewSample& sample, const Parameters& params) {
  const Architecture& arch = params.arch;
  const Index prefix = identity_prefix_len(arch);
  if (identity_prefix.size() != prefix) {
    throw DimensionError("forward_given_sample: identity prefix length mismatch");
  }
  validate_sample(arch, sample);

  ForwardTrace trace;
  trace.h = identity_prefix;
  const Index n = arch.hidden.size();
  for (Index l = prefix; l < n; ++l) {
    Matrix z = params.layers[l].b;
    gemm_nn(params.layers[l].U, trace.h[l - 1], z, 1.0, 1.0);
    if (arch.hidden[l - 1].hybrid()) {
      gemm_nn(params.layers[l].V, sample.codes[l - 1], z, 1.0, 1.0);
    }
    sigmoid_in_place(z);
    trace.h.push_back(std::move(z));
  }

  trace.y_mean = params.b_out;
  gemm_nn(params.U_out, trace.h[n - 1], trace.y_mean, 1.0, 1.0);
  if (arch.hidden[n - 1].hybrid()) {
    gemm_nn(params.V_out, sample.codes[n - 1], trace.y_mean, 1.0, 1.0);
  }
  trace.view_out = view_head_output(trace.y_mean, sample.concatenated(arch), params);
  return trace;
}

ForwardTrace forward_pass(const Matrix& x, const ViewSample& sample, const Parameters& params) {
  ForwardTrace trace = forward_given_sample(extract_identity(x, params), sample, params);
  trace.x = x;
  return trace;
}

double recon_loglik(const Matrix& y_hat, const Matrix& y_mean, double sigma_y) {
  if (!y_hat.same_shape(y_mean)) throw DimensionError("recon_loglik: shape mismatch");
  if (sigma_y <= 0.0) throw ContractError("recon_loglik: sigma_y must be positive");
  const double d = static_cast<double>(y_hat.size());
  return -d * std::log(sigma_y) - squared_distance(y_hat, y_mean) / (2.0 * sigma_y * sigma_y);
}

double view_loglik_discrete(const Matrix& v_hat, const Matrix& view_logits) {
  if (!v_hat.same_shape(view_logits)) throw DimensionError("view_loglik_discrete: shape mismatch");
  if (!is_one_hot(v_hat)) throw ContractError("view_loglik_discrete: target must be one-hot");
  const Matrix ls = log_softmax(view_logits);
  for (Index i = 0; i < v_hat.size(); ++i) {
    if (v_hat[i] == 1.0) return ls[i];
  }
  return 0.0;  // unreachable
}

double view_loglik_continuous(double v_hat, double view_mean, double sigma_v) {
  if (sigma_v <= 0.0) throw ContractError("view_loglik_continuous: sigma_v must be positive");
  const double r = v_hat - view_mean;
  return -std::log(sigma_v) - r * r / (2.0 * sigma_v * sigma_v);
}

double view_loglik(const Matrix& view_target, const Matrix& view_out, const Parameters& params) {
  if (params.arch.view_head == ViewHeadKind::Discrete) {
    return view_loglik_discrete(view_target, view_out);
  }
  if (view_target.size() != 1 || view_out.size() != 1) {
    throw DimensionError("view_loglik: continuous head expects scalar target and output");
  }
  return view_loglik_continuous(view_target[0], view_out[0], params.sigma_v);
}

SampleSet importance_weights(const Matrix& x, const Matrix& y_hat, const Matrix& view_target,
                             const std::vector<ViewSample>& samples, const Parameters& params) {
  if (samples.empty()) throw ContractError("importance_weights: need at least one sample");
  const std::vector<Matrix> prefix = extract_identity(x, params);

  SampleSet set;
  set.samples = samples;
  std::vector<double> lw(samples.size());
  for (Index s = 0; s < samples.size(); ++s) {
    const ForwardTrace trace = forward_given_sample(prefix, samples[s], params);
    lw[s] = recon_loglik(y_hat, trace.y_mean, params.sigma_y) +
            view_loglik(view_target, trace.view_out, params);
    set.samples[s].log_weight = lw[s];
  }
  const double lse = log_sum_exp(lw);
  set.weights.resize(samples.size());
  set.argmax = 0;
  for (Index s = 0; s < samples.size(); ++s) {
    set.weights[s] = std::exp(lw[s] - lse);
    if (lw[s] > lw[set.argmax]) set.argmax = s;
  }
  return set;
}

std::vector<Matrix> reconstruct_spectrum(const Matrix& x, const std::vector<double>& view_labels,
                                         Index s, const Parameters& params, Rng& rng) {
  if (view_labels.empty()) throw ContractError("reconstruct_spectrum: no view labels requested");
  const Architecture& arch = params.arch;
  const std::vector<ViewSample> samples = sample_view_codes(arch, s, rng);
  const std::vector<Matrix> prefix = extract_identity(x, params);

  std::vector<Matrix> y(s);
  std::vector<Matrix> view_out(s);
  for (Index i = 0; i < s; ++i) {
    ForwardTrace trace = forward_given_sample(prefix, samples[i], params);
    y[i] = std::move(trace.y_mean);
    view_out[i] = std::move(trace.view_out);
  }

  std::vector<Matrix> images;
  images.reserve(view_labels.size());
  for (double label : view_labels) {
    Index best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < s; ++i) {
      double score;
      if (arch.view_head == ViewHeadKind::Discrete) {
        const Index j = discrete_label_index(label, arch.num_views);
        score = log_softmax(view_out[i])[j];
      } else {
        const double r = label - view_out[i][0];
        score = -r * r;
      }
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    images.push_back(y[best]);
  }
  return images;
}

ViewEstimate estimate_view(const Matrix& x, const Parameters& params, Index s, Rng& rng,
                           const std::vector<double>& candidate_views) {
  if (candidate_views.empty()) throw ContractError("estimate_view: no candidate views");
  const Architecture& arch = params.arch;
  const std::vector<ViewSample> samples = sample_view_codes(arch, s, rng);
  const std::vector<Matrix> prefix = extract_identity(x, params);

  std::vector<Matrix> y(s);
  std::vector<Matrix> view_out(s);
  for (Index i = 0; i < s; ++i) {
    ForwardTrace trace = forward_given_sample(prefix, samples[i], params);
    y[i] = std::move(trace.y_mean);
    view_out[i] = std::move(trace.view_out);
  }

  ViewEstimate est;
  if (arch.view_head == ViewHeadKind::Continuous) {
    double best_dist = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < candidate_views.size(); ++c) {
      const double z = candidate_views[c];
      Index win = 0;
      double win_err = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < s; ++i) {
        const double r = z - view_out[i][0];
        if (r * r < win_err) {
          win_err = r * r;
          win = i;
        }
      }
      const double dist = squared_distance(x, y[win]);
      if (dist < best_dist) {
        best_dist = dist;
        est.view = z;
        est.sample_index = win;
      }
    }
  } else {
    // arg min over (label, sample) of the squared softmax-response gap
    // between the input and the sample's output.
    std::vector<Matrix> px(s), py(s);
    for (Index i = 0; i < s; ++i) {
      px[i] = softmax(view_head_output(x, samples[i].concatenated(arch), params));
      py[i] = softmax(view_out[i]);
    }
    double best_gap = std::numeric_limits<double>::infinity();
    for (double label : candidate_views) {
      const Index j = discrete_label_index(label, arch.num_views);
      for (Index i = 0; i < s; ++i) {
        const double g = px[i][j] - py[i][j];
        if (g * g < best_gap) {
          best_gap = g * g;
          est.view = static_cast<double>(j);
          est.sample_index = i;
        }
      }
    }
  }
  est.view_feature = samples[est.sample_index].concatenated(arch);
  return est;
}

double lower_bound_estimate(const std::vector<TrainingPair>& batch, Index s,
                            const Parameters& params, Rng& rng) {
  if (batch.empty()) throw ContractError("lower_bound_estimate: empty batch");
  double total = 0.0;
  for (const TrainingPair& pair : batch) {
    const std::vector<ViewSample> samples = sample_view_codes(params.arch, s, rng);
    const SampleSet set = importance_weights(pair.x, pair.y_hat, pair.view_target, samples, params);
    double elbo = 0.0;
    for (Index i = 0; i < set.samples.size(); ++i) {
      elbo += set.weights[i] * set.samples[i].log_weight;
    }
    total += elbo;
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace mvp
