#pragma once

#include <vector>

#include "mvp/pair.hpp"
#include "mvp/parameters.hpp"
#include "mvp/rng.hpp"

namespace mvp {

// One draw of every random unit in the network: codes[l] is the rand_width x 1
// code of hidden layer l (empty for deterministic-only layers).
struct ViewSample {
  std::vector<Matrix> codes;
  double log_weight = 0.0;  // unnormalized, cached by importance_weights

  // Codes of all hybrid layers stacked into one column (layer order).
  Matrix concatenated(const Architecture& arch) const;
};

struct SampleSet {
  std::vector<ViewSample> samples;
  std::vector<double> weights;  // normalized, sum to 1
  Index argmax = 0;             // ties broken by lowest index
};

struct ForwardTrace {
  Matrix x;
  std::vector<Matrix> h;  // one activation column per hidden layer
  Matrix y_mean;          // D_y x 1
  Matrix view_out;        // logits (M x 1) or mean (1 x 1)
};

// Number of leading layers computable without any random code (>= 1; the
// identity pathway).
Index identity_prefix_len(const Architecture& arch);

// Activations of the identity pathway (h^id_1, h^id_2, ... up to the prefix).
std::vector<Matrix> extract_identity(const Matrix& x, const Parameters& params);

std::vector<ViewSample> sample_view_codes(const Architecture& arch, Index s, Rng& rng);

// Completes the stochastic pass from the precomputed identity prefix.
ForwardTrace forward_given_sample(const std::vector<Matrix>& identity_prefix,
                                  const ViewSample& sample, const Parameters& params);
// Full pass from the raw input.
ForwardTrace forward_pass(const Matrix& x, const ViewSample& sample, const Parameters& params);

double recon_loglik(const Matrix& y_hat, const Matrix& y_mean, double sigma_y);
double view_loglik_discrete(const Matrix& v_hat, const Matrix& view_logits);
double view_loglik_continuous(double v_hat, double view_mean, double sigma_v);
// Dispatches on the architecture's head kind; view_target as in TrainingPair.
double view_loglik(const Matrix& view_target, const Matrix& view_out, const Parameters& params);

SampleSet importance_weights(const Matrix& x, const Matrix& y_hat, const Matrix& view_target,
                             const std::vector<ViewSample>& samples, const Parameters& params);

// View labels are class indices (as integral doubles) under the discrete head
// and scaled yaw values under the continuous head.
std::vector<Matrix> reconstruct_spectrum(const Matrix& x, const std::vector<double>& view_labels,
                                         Index s, const Parameters& params, Rng& rng);

struct ViewEstimate {
  double view = 0.0;
  Matrix view_feature;  // winning sample's concatenated codes
  Index sample_index = 0;
};

ViewEstimate estimate_view(const Matrix& x, const Parameters& params, Index s, Rng& rng,
                           const std::vector<double>& candidate_views);

double lower_bound_estimate(const std::vector<TrainingPair>& batch, Index s,
                            const Parameters& params, Rng& rng);

}  // namespace mvp
