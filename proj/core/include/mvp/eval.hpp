#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvp/dataset.hpp"
#include "mvp/lda.hpp"
#include "mvp/training.hpp"

namespace mvp {

enum class FeatureKind { RawPixels, IdentityH1, IdentityH2, ReconH3, ReconH4 };

std::string feature_name(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& name);

struct EvalReport {
  std::string protocol;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<double>> values;  // row_labels.size() x col_labels.size()
  std::map<std::string, std::string> metadata;
};

void write_report_csv(const EvalReport& report, const std::string& path);
std::string report_summary(const EvalReport& report);

// Manifest records plus their images loaded into model space.
struct EvalSet {
  DatasetManifest manifest;
  std::vector<Matrix> images;  // one column per record
};

EvalSet load_eval_set(const DatasetManifest& manifest, const std::string& root);

// Row-sample feature matrix (n x d).  Reconstruction-pathway features fix
// every view code at 0.5, the prior mean.
Matrix extract_features(const Parameters& params, const std::vector<Matrix>& images,
                        FeatureKind kind);

// Feature-level recognition core: LDA fit on the training rows, probes
// classified by the nearest gallery row (Euclidean, discriminant space).
// Returns per-view accuracy aligned with view_axis (NaN where a view has no
// probes) and the average over populated views.
struct RecognitionOutcome {
  std::vector<double> per_view;
  double average = 0.0;
};

RecognitionOutcome recognize(const Matrix& train_features, const std::vector<Index>& train_labels,
                             const Matrix& gallery_features,
                             const std::vector<Index>& gallery_labels,
                             const Matrix& probe_features, const std::vector<Index>& probe_labels,
                             const std::vector<double>& probe_views,
                             const std::vector<double>& view_axis, double lambda = -1.0);

// Gallery/probe recognition across views for each feature kind: the gallery
// holds one frontal image per test identity (gain nearest 1.0), every other
// test image is a probe.  One report row per feature, one column per manifest
// view plus the average.
EvalReport recognition_across_views(const Parameters& params, const EvalSet& train,
                                    const EvalSet& test, const std::vector<FeatureKind>& kinds,
                                    double lambda = -1.0);

// Every image replaced by its reconstruction at its own view label.
std::vector<Matrix> same_view_reconstructions(const Parameters& params, const EvalSet& set,
                                              Index s, Rng& rng);

// Raw-pixel recognition on original images (row "oi") and on same-view
// reconstructions of every image (row "ri").
EvalReport reconstruction_quality(const Parameters& params, const EvalSet& train,
                                  const EvalSet& test, Index s, std::uint64_t seed);

struct PcaModel {
  Matrix mean;        // d x 1
  Matrix components;  // d x k, orthonormal columns
};

PcaModel pca_fit(const Matrix& features, Index k);
Matrix pca_project(const PcaModel& model, const Matrix& features);

// Per-view MAE in degrees (rows "mvp" and "lr").  The MVP path estimates each
// probe's view over the manifest's candidate views; the baseline regresses
// yaw on the top PCA coefficients of the raw training pixels.
EvalReport view_estimation_error(const Parameters& params, const EvalSet& train,
                                 const EvalSet& test, Index s, std::uint64_t seed,
                                 Index pca_dims = 32);

struct InterpolationConfig {
  std::string work_dir;
  std::uint64_t data_seed = 77;
  Index identities = 12;
  Index illums = 1;
  Index size = 32;
  std::string hidden_spec;  // empty selects the library default
  TrainConfig train;
};

// Trains a continuous-head model on views {0,30,60} of a {0,15,30,45,60}
// dataset, then reconstructs the held-out 15/45-degree views from frontal
// inputs.  Rows: model MSE, mean-training-image MSE, nearest-trained-view
// MSE; identity retrieval accuracy of the held-out views goes to metadata.
EvalReport interpolation_experiment(const InterpolationConfig& config);

struct SparsityStats {
  double late_median_max_weight = 0.0;  // median of max_weight_median, final third
  double final_sparsity_fraction = 0.0;
  double final_loss = 0.0;
};

SparsityStats weight_sparsity_stats(const std::vector<EpochMetrics>& metrics);

// Report over one metrics CSV; a second (one-sample) run adds the final-loss
// ratio between the two estimators.
EvalReport sparsity_report(const std::vector<EpochMetrics>& weighted,
                           const std::vector<EpochMetrics>* one_sample = nullptr);

}  // namespace mvp
