#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvp/network.hpp"

namespace mvp {

enum class GradMode { OneSample, WeightedAverage };

struct TrainConfig {
  Index samples = 20;
  GradMode mode = GradMode::WeightedAverage;
  double learning_rate = 0.05;
  double momentum = 0.9;
  Index epochs = 100;
  Index batch_size = 16;
  std::uint64_t seed = 0;
  double sigma_y = 1.0;
  double sigma_v = 0.1;

  void validate() const;
};

struct OptimizerState {
  Parameters buffers;  // momentum, mirrors Parameters shapes
  Index step = 0;

  static OptimizerState init(const Parameters& params);
};

struct LossAndGrad {
  double loss = 0.0;
  Parameters grad;
};

// Objective selector shared by the analytic and finite-difference paths.
struct Objective {
  GradMode mode = GradMode::WeightedAverage;
  bool unsupervised = false;
  double v_tilde = 0.0;       // unsupervised only
  double sigma_vtilde = 0.2;  // unsupervised only
};

// A fixed draw: view samples, the importance weights and argmax frozen at the
// base parameters, and (unsupervised) the view scalars drawn from the head.
struct FrozenDraw {
  std::vector<ViewSample> samples;
  std::vector<double> weights;
  Index argmax = 0;
  std::vector<double> drawn_views;
};

// Production entry points (draw their own samples).
LossAndGrad loss_and_grad_one_sample(const TrainingPair& pair, const Parameters& params,
                                     Index s, Rng& rng);
LossAndGrad loss_and_grad_weighted(const TrainingPair& pair, const Parameters& params,
                                   Index s, Rng& rng);
LossAndGrad train_step_unsupervised(const TrainingPair& pair, double v_tilde,
                                    double sigma_vtilde, const Parameters& params, Index s,
                                    Rng& rng);

// Deterministic cores over pre-drawn samples (used by the production entry
// points and by gradient verification).
LossAndGrad loss_and_grad_with_samples(const TrainingPair& pair, const Parameters& params,
                                       const std::vector<ViewSample>& samples, GradMode mode);
LossAndGrad unsupervised_with_draws(const TrainingPair& pair, double v_tilde,
                                    double sigma_vtilde, const Parameters& params,
                                    const std::vector<ViewSample>& samples,
                                    const std::vector<double>& drawn_views);

// Freeze weights/selection at the current parameters for the given draw.
FrozenDraw freeze_draw(const TrainingPair& pair, const Parameters& params,
                       const std::vector<ViewSample>& samples, const Objective& objective,
                       const std::vector<double>& drawn_views = {});
// The scalar function whose exact gradient the analytic path computes
// (weights and selection held at the frozen values).
double frozen_objective(const TrainingPair& pair, const Parameters& params,
                        const FrozenDraw& frozen, const Objective& objective);
// Central differences of frozen_objective; h must lie in [1e-7, 1e-3].
Parameters finite_diff_gradient(const TrainingPair& pair, const Parameters& params,
                                const FrozenDraw& frozen, const Objective& objective,
                                double h = 1e-5);

struct TensorCheck {
  std::string name;
  double max_rel_err = 0.0;
};
// Per-tensor max relative error between analytic and finite-difference
// gradients (denominator floored to dodge 0/0).
std::vector<TensorCheck> compare_gradients(const Parameters& analytic, const Parameters& fd);

void sgd_step(Parameters& params, const Parameters& grad, OptimizerState& state,
              const TrainConfig& config);

struct EpochMetrics {
  Index epoch = 0;
  double mean_loss = 0.0;
  double elbo_estimate = 0.0;
  double max_weight_mean = 0.0;
  double max_weight_median = 0.0;
  double weight_sparsity_fraction = 0.0;  // fraction of samples with weight > 0.9
  double wall_seconds = 0.0;
};

// One pass over the pairs: seeded shuffle, minibatch gradients (mean over the
// batch), SGD updates.  When `init_views` is non-null the unsupervised
// objective is used; entries align with `pairs`.
EpochMetrics train_epoch(const std::vector<TrainingPair>& pairs, Parameters& params,
                         OptimizerState& state, const TrainConfig& config, Rng& rng,
                         const std::vector<double>* init_views = nullptr,
                         double sigma_vtilde = 0.2);

// k-means over raw target pixels; returns one view initialization in [-1, 1]
// per target, evenly spaced by cluster rank of horizontal intensity centroid.
std::vector<double> cluster_init_views(const std::vector<Matrix>& targets, Index k, Rng& rng);

// Metrics CSV: header + one row per epoch, append-only.
void write_metrics_header(const std::string& path);
void append_metrics_row(const std::string& path, const EpochMetrics& m);
std::vector<EpochMetrics> read_metrics_csv(const std::string& path);

}  // namespace mvp
