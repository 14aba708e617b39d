#include "mvp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mvp/checkpoint.hpp"
#include "mvp/errors.hpp"
#include "mvp/linalg.hpp"
#include "mvp/network.hpp"
#include "mvp/pgm.hpp"

namespace mvp {

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string format_view(double yaw) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", yaw);
  return buf;
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of empty sequence");
  std::sort(values.begin(), values.end());
  const Index n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Index view_column(const std::vector<double>& axis, double yaw) {
  for (Index i = 0; i < axis.size(); ++i) {
    if (std::abs(axis[i] - yaw) < 1e-6) return i;
  }
  throw ContractError("view " + format_view(yaw) + " not on the report's view axis");
}

// Fixes every random unit at the prior mean.
ViewSample mean_code_sample(const Architecture& arch) {
  ViewSample sample;
  sample.codes.resize(arch.hidden.size());
  for (Index l = 0; l < arch.hidden.size(); ++l) {
    if (arch.hidden[l].hybrid()) {
      sample.codes[l] = Matrix::filled(arch.hidden[l].rand_width, 1, 0.5);
    }
  }
  return sample;
}

Matrix rows_from_columns(const std::vector<Matrix>& columns) {
  if (columns.empty()) throw ContractError("no images to extract features from");
  const Index d = columns[0].rows();
  Matrix out(columns.size(), d);
  for (Index i = 0; i < columns.size(); ++i) {
    if (columns[i].rows() != d || columns[i].cols() != 1) {
      throw DimensionError("feature extraction expects uniform column images");
    }
    for (Index j = 0; j < d; ++j) out(i, j) = columns[i][j];
  }
  return out;
}

Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(rows.size(), m.cols());
  for (Index i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out(i, j) = m(rows[i], j);
  }
  return out;
}

double squared_row_distance(const Matrix& a, Index ra, const Matrix& b, Index rb) {
  const double* x = a.row(ra);
  const double* y = b.row(rb);
  double acc = 0.0;
  for (Index j = 0; j < a.cols(); ++j) {
    const double d = x[j] - y[j];
    acc += d * d;
  }
  return acc;
}

Index nearest_row(const Matrix& haystack, const Matrix& needles, Index needle_row) {
  Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Index g = 0; g < haystack.rows(); ++g) {
    const double dist = squared_row_distance(needles, needle_row, haystack, g);
    if (dist < best_dist) {
      best_dist = dist;
      best = g;
    }
  }
  return best;
}

// Gallery = one frontal record per identity, gain nearest 1.0; probes = rest.
void split_gallery_probes(const EvalSet& set, std::vector<Index>& gallery,
                          std::vector<Index>& probes) {
  gallery.clear();
  probes.clear();
  std::vector<Index> order;  // identities in first-appearance order
  for (const ManifestRecord& rec : set.manifest.records) {
    if (std::find(order.begin(), order.end(), rec.identity) == order.end()) {
      order.push_back(rec.identity);
    }
  }
  std::vector<Index> chosen;
  for (Index id : order) {
    Index best = set.manifest.records.size();
    double best_gain_gap = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < set.manifest.records.size(); ++i) {
      const ManifestRecord& rec = set.manifest.records[i];
      if (rec.identity != id || std::abs(rec.yaw) > 1e-6) continue;
      const double gap = std::abs(set.manifest.illums[rec.illum_index] - 1.0);
      if (gap < best_gain_gap) {
        best_gain_gap = gap;
        best = i;
      }
    }
    if (best == set.manifest.records.size()) {
      throw ContractError("missing frontal gallery image for identity " + std::to_string(id));
    }
    chosen.push_back(best);
  }
  for (Index i = 0; i < set.manifest.records.size(); ++i) {
    if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
      probes.push_back(i);
    }
  }
  gallery = std::move(chosen);
}

std::vector<Index> record_identities(const EvalSet& set, const std::vector<Index>& indices) {
  std::vector<Index> out;
  out.reserve(indices.size());
  for (Index i : indices) out.push_back(set.manifest.records[i].identity);
  return out;
}

std::vector<Matrix> select_images(const EvalSet& set, const std::vector<Index>& indices) {
  std::vector<Matrix> out;
  out.reserve(indices.size());
  for (Index i : indices) out.push_back(set.images[i]);
  return out;
}

std::vector<Index> all_indices(const EvalSet& set) {
  std::vector<Index> out(set.manifest.records.size());
  for (Index i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

double own_view_label(const Architecture& arch, const ManifestRecord& rec) {
  return arch.view_head == ViewHeadKind::Discrete ? static_cast<double>(rec.view_index)
                                                  : rec.yaw / 90.0;
}

// Least squares via the normal equations and a sym_eigh pseudo-inverse.
Matrix solve_least_squares(const Matrix& design, const Matrix& targets) {
  const Index k = design.cols();
  Matrix gram(k, k);
  gemm_tn(design, design, gram);
  Matrix rhs(k, 1);
  gemm_tn(design, targets, rhs);

  const EighResult eig = sym_eigh(gram);
  const double floor = 1e-12 * std::max(eig.values.front(), 0.0);
  Matrix coeffs(k, 1);
  gemm_tn(eig.vectors, rhs, coeffs);  // Q^T rhs
  for (Index i = 0; i < k; ++i) coeffs[i] = eig.values[i] > floor ? coeffs[i] / eig.values[i] : 0.0;
  Matrix weights(k, 1);
  gemm_nn(eig.vectors, coeffs, weights);
  return weights;
}

struct MaeAccumulator {
  std::vector<double> abs_sum;
  std::vector<Index> count;
  double total = 0.0;
  Index n = 0;

  explicit MaeAccumulator(Index views) : abs_sum(views, 0.0), count(views, 0) {}

  void add(Index view_col, double error_deg) {
    abs_sum[view_col] += std::abs(error_deg);
    count[view_col] += 1;
    total += std::abs(error_deg);
    n += 1;
  }

  std::vector<double> row() const {
    std::vector<double> out;
    for (Index i = 0; i < abs_sum.size(); ++i) {
      out.push_back(count[i] > 0 ? abs_sum[i] / static_cast<double>(count[i])
                                 : std::numeric_limits<double>::quiet_NaN());
    }
    out.push_back(n > 0 ? total / static_cast<double>(n)
                        : std::numeric_limits<double>::quiet_NaN());
    return out;
  }
};

std::vector<std::string> view_columns_with_average(const std::vector<double>& views) {
  std::vector<std::string> cols;
  for (double v : views) cols.push_back(format_view(v));
  cols.push_back("avg");
  return cols;
}

double image_space_mse(const Matrix& predicted_model, const Matrix& truth_model) {
  if (!predicted_model.same_shape(truth_model)) {
    throw DimensionError("mse: prediction and truth shapes differ");
  }
  double acc = 0.0;
  for (Index i = 0; i < predicted_model.size(); ++i) {
    const double pred = std::clamp(predicted_model[i] + 0.5, 0.0, 1.0);
    const double diff = pred - (truth_model[i] + 0.5);
    acc += diff * diff;
  }
  return acc / static_cast<double>(predicted_model.size());
}

}  // namespace

std::string feature_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::RawPixels: return "raw";
    case FeatureKind::IdentityH1: return "h_id_1";
    case FeatureKind::IdentityH2: return "h_id_2";
    case FeatureKind::ReconH3: return "h_r_3";
    case FeatureKind::ReconH4: return "h_r_4";
  }
  throw ContractError("unknown feature kind");
}

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "raw") return FeatureKind::RawPixels;
  if (name == "h_id_1") return FeatureKind::IdentityH1;
  if (name == "h_id_2") return FeatureKind::IdentityH2;
  if (name == "h_r_3") return FeatureKind::ReconH3;
  if (name == "h_r_4") return FeatureKind::ReconH4;
  throw ContractError("unknown feature name: " + name +
                      " (expected raw|h_id_1|h_id_2|h_r_3|h_r_4)");
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  if (report.values.size() != report.row_labels.size()) {
    throw ContractError("report rows do not match row labels");
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open report for writing: " + path);
  f << "protocol," << report.protocol << "\n";
  for (const auto& [key, value] : report.metadata) {
    f << "meta," << key << "," << value << "\n";
  }
  for (const std::string& col : report.col_labels) f << "," << col;
  f << "\n";
  for (Index r = 0; r < report.row_labels.size(); ++r) {
    if (report.values[r].size() != report.col_labels.size()) {
      throw ContractError("report row width does not match column labels");
    }
    f << report.row_labels[r];
    for (double v : report.values[r]) f << "," << format_number(v);
    f << "\n";
  }
  if (!f) throw IoError("short report write: " + path);
}

std::string report_summary(const EvalReport& report) {
  std::ostringstream out;
  out << "protocol: " << report.protocol << "\n";
  for (Index r = 0; r < report.row_labels.size(); ++r) {
    out << "  " << report.row_labels[r] << ":";
    for (Index c = 0; c < report.col_labels.size(); ++c) {
      out << " " << report.col_labels[c] << "=" << format_number(report.values[r][c]);
    }
    out << "\n";
  }
  for (const auto& [key, value] : report.metadata) {
    out << "  # " << key << " = " << value << "\n";
  }
  return out.str();
}

EvalSet load_eval_set(const DatasetManifest& manifest, const std::string& root) {
  EvalSet set;
  set.manifest = manifest;
  set.images.reserve(manifest.records.size());
  for (const ManifestRecord& rec : manifest.records) {
    const Matrix image = read_pgm(root + "/" + rec.path);
    if (image.rows() != manifest.image_size || image.cols() != manifest.image_size) {
      throw ContractError("image size mismatch against manifest: " + rec.path);
    }
    set.images.push_back(image_to_model(image));
  }
  return set;
}

Matrix extract_features(const Parameters& params, const std::vector<Matrix>& images,
                        FeatureKind kind) {
  if (kind == FeatureKind::RawPixels) return rows_from_columns(images);
  if (images.empty()) throw ContractError("no images to extract features from");

  const Architecture& arch = params.arch;
  const Index prefix = identity_prefix_len(arch);
  std::vector<Matrix> features;
  features.reserve(images.size());
  switch (kind) {
    case FeatureKind::IdentityH1:
    case FeatureKind::IdentityH2: {
      const Index layer = kind == FeatureKind::IdentityH1 ? 0 : 1;
      if (layer >= prefix) {
        throw ContractError("identity pathway has only " + std::to_string(prefix) +
                            " layer(s); " + feature_name(kind) + " unavailable");
      }
      for (const Matrix& x : images) features.push_back(extract_identity(x, params)[layer]);
      break;
    }
    case FeatureKind::ReconH3:
    case FeatureKind::ReconH4: {
      const Index layer = kind == FeatureKind::ReconH3 ? 2 : 3;
      if (layer >= arch.hidden.size()) {
        throw ContractError("network has only " + std::to_string(arch.hidden.size()) +
                            " hidden layer(s); " + feature_name(kind) + " unavailable");
      }
      const ViewSample sample = mean_code_sample(arch);
      for (const Matrix& x : images) features.push_back(forward_pass(x, sample, params).h[layer]);
      break;
    }
    default:
      throw ContractError("unknown feature kind");
  }
  return rows_from_columns(features);
}

RecognitionOutcome recognize(const Matrix& train_features, const std::vector<Index>& train_labels,
                             const Matrix& gallery_features,
                             const std::vector<Index>& gallery_labels,
                             const Matrix& probe_features, const std::vector<Index>& probe_labels,
                             const std::vector<double>& probe_views,
                             const std::vector<double>& view_axis, double lambda) {
  if (gallery_features.rows() == 0) throw ContractError("recognize: empty gallery");
  if (probe_features.rows() == 0) throw ContractError("recognize: no probes");
  if (gallery_labels.size() != gallery_features.rows() ||
      probe_labels.size() != probe_features.rows() || probe_views.size() != probe_labels.size()) {
    throw ContractError("recognize: label/view counts do not match feature rows");
  }

  const LdaModel lda = lda_fit(train_features, train_labels, lambda);
  const Matrix gallery = lda_project(lda, gallery_features);
  const Matrix probes = lda_project(lda, probe_features);

  std::vector<Index> correct(view_axis.size(), 0);
  std::vector<Index> total(view_axis.size(), 0);
  for (Index p = 0; p < probes.rows(); ++p) {
    const Index g = nearest_row(gallery, probes, p);
    const Index col = view_column(view_axis, probe_views[p]);
    total[col] += 1;
    if (gallery_labels[g] == probe_labels[p]) correct[col] += 1;
  }

  RecognitionOutcome outcome;
  double sum = 0.0;
  Index populated = 0;
  for (Index i = 0; i < view_axis.size(); ++i) {
    if (total[i] == 0) {
      outcome.per_view.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double acc = static_cast<double>(correct[i]) / static_cast<double>(total[i]);
    outcome.per_view.push_back(acc);
    sum += acc;
    populated += 1;
  }
  if (populated == 0) throw ContractError("recognize: no populated view column");
  outcome.average = sum / static_cast<double>(populated);
  return outcome;
}

EvalReport recognition_across_views(const Parameters& params, const EvalSet& train,
                                    const EvalSet& test, const std::vector<FeatureKind>& kinds,
                                    double lambda) {
  if (kinds.empty()) throw ContractError("recognition: no feature kinds requested");
  std::vector<Index> gallery_idx, probe_idx;
  split_gallery_probes(test, gallery_idx, probe_idx);
  if (probe_idx.empty()) throw ContractError("recognition: test set has no probes");

  const std::vector<Index> train_labels = record_identities(train, all_indices(train));
  const std::vector<Index> gallery_labels = record_identities(test, gallery_idx);
  const std::vector<Index> probe_labels = record_identities(test, probe_idx);
  std::vector<double> probe_views;
  for (Index i : probe_idx) probe_views.push_back(test.manifest.records[i].yaw);

  EvalReport report;
  report.protocol = "recognition";
  report.col_labels = view_columns_with_average(test.manifest.views);
  for (FeatureKind kind : kinds) {
    const Matrix train_f = extract_features(params, train.images, kind);
    const Matrix gallery_f = extract_features(params, select_images(test, gallery_idx), kind);
    const Matrix probe_f = extract_features(params, select_images(test, probe_idx), kind);
    const RecognitionOutcome outcome =
        recognize(train_f, train_labels, gallery_f, gallery_labels, probe_f, probe_labels,
                  probe_views, test.manifest.views, lambda);
    report.row_labels.push_back(feature_name(kind));
    std::vector<double> row = outcome.per_view;
    row.push_back(outcome.average);
    report.values.push_back(std::move(row));
  }
  report.metadata["train_images"] = std::to_string(train.images.size());
  report.metadata["gallery_images"] = std::to_string(gallery_idx.size());
  report.metadata["probe_images"] = std::to_string(probe_idx.size());
  report.metadata["lambda"] = lambda > 0.0 ? format_number(lambda) : "auto";
  return report;
}

std::vector<Matrix> same_view_reconstructions(const Parameters& params, const EvalSet& set,
                                              Index s, Rng& rng) {
  std::vector<Matrix> out;
  out.reserve(set.images.size());
  for (Index i = 0; i < set.images.size(); ++i) {
    const double label = own_view_label(params.arch, set.manifest.records[i]);
    out.push_back(reconstruct_spectrum(set.images[i], {label}, s, params, rng)[0]);
  }
  return out;
}

EvalReport reconstruction_quality(const Parameters& params, const EvalSet& train,
                                  const EvalSet& test, Index s, std::uint64_t seed) {
  const std::vector<FeatureKind> raw = {FeatureKind::RawPixels};
  const EvalReport oi = recognition_across_views(params, train, test, raw);

  Rng rng(seed);
  EvalSet train_ri = train;
  train_ri.images = same_view_reconstructions(params, train, s, rng);
  EvalSet test_ri = test;
  test_ri.images = same_view_reconstructions(params, test, s, rng);
  const EvalReport ri = recognition_across_views(params, train_ri, test_ri, raw);

  EvalReport report;
  report.protocol = "recon-quality";
  report.col_labels = oi.col_labels;
  report.row_labels = {"oi", "ri"};
  report.values = {oi.values[0], ri.values[0]};
  report.metadata = oi.metadata;
  report.metadata["samples"] = std::to_string(s);
  report.metadata["seed"] = std::to_string(seed);
  return report;
}

PcaModel pca_fit(const Matrix& features, Index k) {
  const Index n = features.rows();
  const Index d = features.cols();
  if (n < 2) throw ContractError("pca_fit: need at least 2 samples");
  if (k == 0) throw ContractError("pca_fit: need at least 1 component");

  PcaModel model;
  model.mean = Matrix(d, 1);
  for (Index i = 0; i < n; ++i) {
    const double* x = features.row(i);
    for (Index j = 0; j < d; ++j) model.mean[j] += x[j];
  }
  scale_in_place(model.mean, 1.0 / static_cast<double>(n));

  Matrix centered = features;
  for (Index i = 0; i < n; ++i) {
    double* x = centered.row(i);
    for (Index j = 0; j < d; ++j) x[j] -= model.mean[j];
  }

  if (n <= d) {
    // Gram trick: eigenvectors of X X^T lift to covariance eigenvectors.
    Matrix gram(n, n);
    gemm_nt(centered, centered, gram);
    const EighResult eig = sym_eigh(gram);
    const double floor = 1e-12 * std::max(eig.values.front(), 0.0);
    Index available = 0;
    while (available < n && eig.values[available] > floor) ++available;
    if (available == 0) throw ContractError("pca_fit: features have no variance");
    k = std::min(k, available);
    Matrix top(n, k);
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < k; ++c) top(r, c) = eig.vectors(r, c);
    }
    model.components = Matrix(d, k);
    gemm_tn(centered, top, model.components);
    for (Index c = 0; c < k; ++c) {
      const double inv_norm = 1.0 / std::sqrt(eig.values[c]);
      for (Index r = 0; r < d; ++r) model.components(r, c) *= inv_norm;
    }
  } else {
    Matrix cov(d, d);
    gemm_tn(centered, centered, cov);
    const EighResult eig = sym_eigh(cov);
    const double floor = 1e-12 * std::max(eig.values.front(), 0.0);
    Index available = 0;
    while (available < d && eig.values[available] > floor) ++available;
    if (available == 0) throw ContractError("pca_fit: features have no variance");
    k = std::min(k, available);
    model.components = Matrix(d, k);
    for (Index r = 0; r < d; ++r) {
      for (Index c = 0; c < k; ++c) model.components(r, c) = eig.vectors(r, c);
    }
  }
  return model;
}

Matrix pca_project(const PcaModel& model, const Matrix& features) {
  const Index d = model.components.rows();
  if (features.cols() != d) {
    throw DimensionError("pca_project: expected " + std::to_string(d) + " feature columns");
  }
  Matrix centered = features;
  for (Index i = 0; i < centered.rows(); ++i) {
    double* x = centered.row(i);
    for (Index j = 0; j < d; ++j) x[j] -= model.mean[j];
  }
  Matrix out(features.rows(), model.components.cols());
  gemm_nn(centered, model.components, out);
  return out;
}

EvalReport view_estimation_error(const Parameters& params, const EvalSet& train,
                                 const EvalSet& test, Index s, std::uint64_t seed,
                                 Index pca_dims) {
  const std::vector<double>& views = test.manifest.views;
  if (views.empty()) throw ContractError("view estimation: manifest lists no views");

  std::vector<double> candidates;  // label space
  for (Index i = 0; i < views.size(); ++i) {
    candidates.push_back(params.arch.view_head == ViewHeadKind::Discrete
                             ? static_cast<double>(i)
                             : views[i] / 90.0);
  }

  Rng rng(seed);
  MaeAccumulator mvp(views.size());
  for (Index i = 0; i < test.images.size(); ++i) {
    const ManifestRecord& rec = test.manifest.records[i];
    const ViewEstimate est = estimate_view(test.images[i], params, s, rng, candidates);
    const double predicted_deg =
        params.arch.view_head == ViewHeadKind::Discrete
            ? views[static_cast<Index>(std::lround(est.view))]
            : est.view * 90.0;
    mvp.add(view_column(views, rec.yaw), predicted_deg - rec.yaw);
  }

  const Matrix train_raw = extract_features(params, train.images, FeatureKind::RawPixels);
  const PcaModel pca = pca_fit(train_raw, pca_dims);
  const Matrix train_coeffs = pca_project(pca, train_raw);
  Matrix design(train_coeffs.rows(), train_coeffs.cols() + 1);
  for (Index r = 0; r < train_coeffs.rows(); ++r) {
    for (Index c = 0; c < train_coeffs.cols(); ++c) design(r, c) = train_coeffs(r, c);
    design(r, train_coeffs.cols()) = 1.0;
  }
  Matrix targets(train.images.size(), 1);
  for (Index i = 0; i < train.images.size(); ++i) targets[i] = train.manifest.records[i].yaw;
  const Matrix weights = solve_least_squares(design, targets);

  const Matrix test_raw = extract_features(params, test.images, FeatureKind::RawPixels);
  const Matrix test_coeffs = pca_project(pca, test_raw);
  MaeAccumulator lr(views.size());
  for (Index i = 0; i < test_coeffs.rows(); ++i) {
    double predicted = weights[test_coeffs.cols()];
    for (Index c = 0; c < test_coeffs.cols(); ++c) predicted += test_coeffs(i, c) * weights[c];
    const ManifestRecord& rec = test.manifest.records[i];
    lr.add(view_column(views, rec.yaw), predicted - rec.yaw);
  }

  EvalReport report;
  report.protocol = "view-error";
  report.col_labels = view_columns_with_average(views);
  report.row_labels = {"mvp", "lr"};
  report.values = {mvp.row(), lr.row()};
  report.metadata["samples"] = std::to_string(s);
  report.metadata["seed"] = std::to_string(seed);
  report.metadata["pca_dims"] = std::to_string(pca.components.cols());
  report.metadata["probe_images"] = std::to_string(test.images.size());
  return report;
}

EvalReport interpolation_experiment(const InterpolationConfig& config) {
  if (config.work_dir.empty()) throw ContractError("interpolation: work_dir is required");
  config.train.validate();

  GenerateConfig gen;
  gen.seed = config.data_seed;
  gen.identities = config.identities;
  gen.views = {0, 15, 30, 45, 60};
  gen.illums = default_illums(config.illums);
  gen.size = config.size;
  const std::string root = (std::filesystem::path(config.work_dir) / "interp_data").string();
  std::filesystem::create_directories(root);
  const DatasetManifest manifest = generate_dataset(gen, root);
  const EvalSet full = load_eval_set(manifest, root);

  const std::vector<double> trained_views = {0, 30, 60};
  const DatasetManifest train_manifest = filter_views(manifest, trained_views);
  const std::vector<TrainingPair> pairs =
      build_pairs(train_manifest, root, Pairing::AllViews, ViewHeadKind::Continuous);

  const std::string hidden =
      config.hidden_spec.empty() ? std::string(kDefaultHiddenSpec) : config.hidden_spec;
  const Architecture arch =
      make_architecture(gen.size * gen.size, hidden, ViewHeadKind::Continuous, 0);
  Rng rng(config.train.seed);
  Parameters params = init_parameters(arch, rng.next_u64());
  params.sigma_y = config.train.sigma_y;
  params.sigma_v = config.train.sigma_v;
  OptimizerState state = OptimizerState::init(params);

  const std::string metrics_path =
      (std::filesystem::path(config.work_dir) / "interp_metrics.csv").string();
  write_metrics_header(metrics_path);
  EpochMetrics last;
  for (Index epoch = 1; epoch <= config.train.epochs; ++epoch) {
    last = train_epoch(pairs, params, state, config.train, rng);
    last.epoch = epoch;
    append_metrics_row(metrics_path, last);
  }
  save_checkpoint(params, (std::filesystem::path(config.work_dir) / "interp.mvpc").string());

  // Index the full set by (identity, yaw, illum).
  auto find_record = [&](Index identity, double yaw, Index illum) -> Index {
    for (Index i = 0; i < full.manifest.records.size(); ++i) {
      const ManifestRecord& rec = full.manifest.records[i];
      if (rec.identity == identity && rec.illum_index == illum && std::abs(rec.yaw - yaw) < 1e-6) {
        return i;
      }
    }
    throw ContractError("interpolation: dataset is missing a required render");
  };

  Matrix mean_train_image;  // model space
  for (Index i = 0; i < full.manifest.records.size(); ++i) {
    const double yaw = full.manifest.records[i].yaw;
    const bool is_trained =
        std::any_of(trained_views.begin(), trained_views.end(),
                    [&](double v) { return std::abs(v - yaw) < 1e-6; });
    if (!is_trained) continue;
    if (mean_train_image.empty()) {
      mean_train_image = full.images[i];
    } else {
      add_in_place(mean_train_image, full.images[i]);
    }
  }
  scale_in_place(mean_train_image,
                 1.0 / static_cast<double>(gen.identities * trained_views.size() *
                                           gen.illums.size()));

  const std::vector<double> held_out = {15, 45};
  std::vector<double> mvp_mse(held_out.size(), 0.0);
  std::vector<double> mean_mse(held_out.size(), 0.0);
  std::vector<double> nearest_mse(held_out.size(), 0.0);
  Index retrieval_correct = 0;
  Index retrieval_total = 0;

  std::vector<Matrix> gallery_images;  // frontal images, identity order
  for (Index id = 0; id < gen.identities; ++id) {
    for (Index il = 0; il < gen.illums.size(); ++il) {
      gallery_images.push_back(full.images[find_record(id, 0.0, il)]);
    }
  }
  const Matrix gallery_features = extract_features(params, gallery_images, FeatureKind::IdentityH2);

  Rng eval_rng(config.train.seed + 1);
  const Index cases = gen.identities * gen.illums.size();
  for (Index id = 0; id < gen.identities; ++id) {
    for (Index il = 0; il < gen.illums.size(); ++il) {
      const Matrix& frontal = full.images[find_record(id, 0.0, il)];
      std::vector<double> labels;
      for (double v : held_out) labels.push_back(v / 90.0);
      const std::vector<Matrix> predictions =
          reconstruct_spectrum(frontal, labels, config.train.samples, params, eval_rng);
      for (Index t = 0; t < held_out.size(); ++t) {
        const Matrix& truth = full.images[find_record(id, held_out[t], il)];
        mvp_mse[t] += image_space_mse(predictions[t], truth);
        mean_mse[t] += image_space_mse(mean_train_image, truth);
        double best = std::numeric_limits<double>::infinity();
        for (double v : trained_views) {
          best = std::min(best, image_space_mse(full.images[find_record(id, v, il)], truth));
        }
        nearest_mse[t] += best;

        const Matrix probe_feature = extract_features(params, {truth}, FeatureKind::IdentityH2);
        const Index hit = nearest_row(gallery_features, probe_feature, 0);
        if (hit / gen.illums.size() == id) retrieval_correct += 1;
        retrieval_total += 1;
      }
    }
  }
  for (Index t = 0; t < held_out.size(); ++t) {
    mvp_mse[t] /= static_cast<double>(cases);
    mean_mse[t] /= static_cast<double>(cases);
    nearest_mse[t] /= static_cast<double>(cases);
  }

  EvalReport report;
  report.protocol = "interpolation";
  report.col_labels = {"15", "45"};
  report.row_labels = {"mvp", "mean_image", "nearest_view"};
  report.values = {mvp_mse, mean_mse, nearest_mse};
  report.metadata["retrieval_accuracy"] =
      format_number(static_cast<double>(retrieval_correct) / static_cast<double>(retrieval_total));
  report.metadata["train_pairs"] = std::to_string(pairs.size());
  report.metadata["epochs"] = std::to_string(config.train.epochs);
  report.metadata["final_mean_loss"] = format_number(last.mean_loss);
  report.metadata["hidden_spec"] = hidden;
  report.metadata["data_seed"] = std::to_string(config.data_seed);
  report.metadata["train_seed"] = std::to_string(config.train.seed);
  return report;
}

SparsityStats weight_sparsity_stats(const std::vector<EpochMetrics>& metrics) {
  if (metrics.size() < 2) throw ContractError("sparsity stats need metrics from >= 2 epochs");
  const Index n = metrics.size();
  const Index tail = std::max<Index>(1, n / 3);
  std::vector<double> late;
  for (Index i = n - tail; i < n; ++i) late.push_back(metrics[i].max_weight_median);

  SparsityStats stats;
  stats.late_median_max_weight = median_of(late);
  stats.final_sparsity_fraction = metrics.back().weight_sparsity_fraction;
  stats.final_loss = metrics.back().mean_loss;
  return stats;
}

EvalReport sparsity_report(const std::vector<EpochMetrics>& weighted,
                           const std::vector<EpochMetrics>* one_sample) {
  const SparsityStats wa = weight_sparsity_stats(weighted);

  EvalReport report;
  report.protocol = "sparsity";
  report.col_labels = {"late_median_max_weight", "final_sparsity_fraction", "final_loss"};
  report.row_labels = {"weighted"};
  report.values = {{wa.late_median_max_weight, wa.final_sparsity_fraction, wa.final_loss}};
  report.metadata["epochs"] = std::to_string(weighted.size());
  if (one_sample != nullptr) {
    const SparsityStats os = weight_sparsity_stats(*one_sample);
    report.row_labels.push_back("one_sample");
    report.values.push_back({os.late_median_max_weight, os.final_sparsity_fraction, os.final_loss});
    report.metadata["final_loss_ratio"] = format_number(os.final_loss / wa.final_loss);
  }
  return report;
}

}  // namespace mvp
