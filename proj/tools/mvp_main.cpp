#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvp/checkpoint.hpp"
#include "mvp/dataset.hpp"
#include "mvp/errors.hpp"
#include "mvp/eval.hpp"
#include "mvp/network.hpp"
#include "mvp/pgm.hpp"
#include "mvp/training.hpp"

namespace fs = std::filesystem;
using namespace mvp;

namespace {

std::vector<double> parse_degree_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t at = 0;
  while (at <= csv.size()) {
    const std::size_t comma = csv.find(',', at);
    const std::string token = csv.substr(at, comma == std::string::npos ? comma : comma - at);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      throw ContractError("bad number in list: '" + token + "'");
    }
    if (used != token.size()) throw ContractError("bad number in list: '" + token + "'");
    out.push_back(value);
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  if (out.empty()) throw ContractError("empty value list");
  return out;
}

std::string format_degrees(double deg) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", deg);
  return buf;
}

std::string trim(const std::string& text) {
  const std::size_t first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const std::size_t last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

// Plain key=value config; keys are long option names, command-line flags win.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

struct GenDataOpts {
  std::string out;
  std::uint64_t seed = 1234;
  Index identities = 50;
  std::string views = "-45,-30,-15,0,15,30,45";
  Index illums = 3;
  Index size = 32;
  double blob_std = 1.6;
};

int run_gen_data(const GenDataOpts& opts) {
  GenerateConfig config;
  config.seed = opts.seed;
  config.identities = opts.identities;
  config.views = parse_degree_list(opts.views);
  config.illums = default_illums(opts.illums);
  config.size = opts.size;
  config.blob_std = opts.blob_std;
  const DatasetManifest manifest = generate_dataset(config, opts.out);
  std::printf("wrote %zu images under %s\n", manifest.records.size(), opts.out.c_str());
  std::printf("manifest: %s\n", (fs::path(opts.out) / "manifest.txt").string().c_str());
  return 0;
}

struct TrainOpts {
  std::string config;
  std::string data;
  std::string out;
  std::string resume;
  std::string hidden = kDefaultHiddenSpec;
  std::string grad_mode = "weighted";
  std::string view_head = "discrete";
  std::string pairing = "all";
  Index train_identities = 0;  // 0 = every identity in the manifest
  bool unsupervised = false;
  Index clusters = 7;
  double sigma_vtilde = 0.2;
  TrainConfig train;
};

int run_train(const TrainOpts& opts) {
  DatasetManifest manifest = read_manifest((fs::path(opts.data) / "manifest.txt").string());
  if (opts.train_identities > 0) {
    manifest = filter_identities(manifest, 0, opts.train_identities);
  }
  const ViewHeadKind head =
      opts.view_head == "discrete" ? ViewHeadKind::Discrete : ViewHeadKind::Continuous;
  const Pairing pairing = opts.pairing == "all" ? Pairing::AllViews : Pairing::FrontalOnly;
  const std::vector<TrainingPair> pairs = build_pairs(manifest, opts.data, pairing, head);

  TrainConfig config = opts.train;
  config.mode = opts.grad_mode == "weighted" ? GradMode::WeightedAverage : GradMode::OneSample;
  config.validate();

  Rng rng(config.seed);
  Parameters params = [&] {
    if (!opts.resume.empty()) return load_checkpoint(opts.resume);
    const Architecture arch = make_architecture(manifest.image_size * manifest.image_size,
                                                opts.hidden, head, manifest.views.size());
    Parameters p = init_parameters(arch, rng.next_u64());
    p.sigma_y = config.sigma_y;
    p.sigma_v = config.sigma_v;
    return p;
  }();
  if (params.arch.input_dim != manifest.image_size * manifest.image_size) {
    throw ContractError("checkpoint input size does not match the dataset");
  }

  std::vector<double> init_views;
  if (opts.unsupervised) {
    std::vector<Matrix> targets;
    targets.reserve(pairs.size());
    for (const TrainingPair& pair : pairs) targets.push_back(pair.y_hat);
    init_views = cluster_init_views(targets, opts.clusters, rng);
  }

  fs::create_directories(opts.out);
  const std::string metrics_path = (fs::path(opts.out) / "metrics.csv").string();
  write_metrics_header(metrics_path);
  auto ckpt_path = [&](Index epoch) {
    return (fs::path(opts.out) / ("ckpt_epoch" + std::to_string(epoch) + ".mvpc")).string();
  };
  save_checkpoint(params, ckpt_path(0));

  OptimizerState state = OptimizerState::init(params);
  std::string final_path = ckpt_path(0);
  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochMetrics m = train_epoch(pairs, params, state, config, rng,
                                 opts.unsupervised ? &init_views : nullptr, opts.sigma_vtilde);
    m.epoch = epoch;
    append_metrics_row(metrics_path, m);
    final_path = ckpt_path(epoch);
    save_checkpoint(params, final_path);
    std::printf("epoch %zu/%zu  loss %.6f  elbo %.4f  wmax median %.3f  %.1fs\n", epoch,
                config.epochs, m.mean_loss, m.elbo_estimate, m.max_weight_median, m.wall_seconds);
    std::fflush(stdout);
  }
  std::printf("final checkpoint: %s\n", final_path.c_str());
  std::printf("metrics: %s\n", metrics_path.c_str());
  return 0;
}

struct ReconstructOpts {
  std::string ckpt;
  std::string input;
  std::string out;
  std::string views = "all";
  Index samples = 20;
  std::uint64_t seed = 9;
};

int run_reconstruct(const ReconstructOpts& opts) {
  const Parameters params = load_checkpoint(opts.ckpt);
  const Architecture& arch = params.arch;
  const Index side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(arch.output_dim))));
  if (side * side != arch.output_dim) {
    throw ContractError("checkpoint output is not a square image");
  }

  std::vector<double> labels;        // network label space
  std::vector<std::string> names;    // file-name fragments
  if (arch.view_head == ViewHeadKind::Discrete) {
    if (opts.views == "all") {
      for (Index i = 0; i < arch.num_views; ++i) labels.push_back(static_cast<double>(i));
    } else {
      for (double v : parse_degree_list(opts.views)) {
        if (v != std::floor(v) || v < 0 || v >= static_cast<double>(arch.num_views)) {
          throw ContractError("view label " + format_degrees(v) +
                              " invalid; valid labels are 0.." +
                              std::to_string(arch.num_views - 1));
        }
        labels.push_back(v);
      }
    }
    for (double v : labels) names.push_back(format_degrees(v));
  } else {
    const std::vector<double> degrees =
        opts.views == "all" ? std::vector<double>{-45, -30, -15, 0, 15, 30, 45}
                            : parse_degree_list(opts.views);
    for (double deg : degrees) {
      labels.push_back(deg / 90.0);
      names.push_back(format_degrees(deg));
    }
  }

  const Matrix image = read_pgm(opts.input);
  const Matrix x = image_to_model(image);
  Rng rng(opts.seed);
  const std::vector<Matrix> spectrum = reconstruct_spectrum(x, labels, opts.samples, params, rng);

  fs::create_directories(opts.out);
  Matrix sheet(side, side * spectrum.size());
  for (Index i = 0; i < spectrum.size(); ++i) {
    const Matrix view_image = model_to_image(spectrum[i], side);
    write_pgm(view_image, (fs::path(opts.out) / ("view_" + names[i] + ".pgm")).string());
    for (Index r = 0; r < side; ++r) {
      for (Index c = 0; c < side; ++c) sheet(r, i * side + c) = view_image(r, c);
    }
  }
  const std::string sheet_path = (fs::path(opts.out) / "spectrum.pgm").string();
  write_pgm(sheet, sheet_path);
  std::printf("wrote %zu view(s) and %s\n", spectrum.size(), sheet_path.c_str());
  return 0;
}

struct EstimateViewOpts {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string candidates;  // empty = manifest views
  Index samples = 20;
  std::uint64_t seed = 11;
};

int run_estimate_view(const EstimateViewOpts& opts) {
  const Parameters params = load_checkpoint(opts.ckpt);
  const DatasetManifest manifest = read_manifest((fs::path(opts.data) / "manifest.txt").string());
  const EvalSet set = load_eval_set(manifest, opts.data);
  const std::vector<double> candidate_degrees =
      opts.candidates.empty() ? manifest.views : parse_degree_list(opts.candidates);

  std::vector<double> labels;
  for (Index i = 0; i < candidate_degrees.size(); ++i) {
    labels.push_back(params.arch.view_head == ViewHeadKind::Discrete
                         ? static_cast<double>(i)
                         : candidate_degrees[i] / 90.0);
  }

  std::ofstream csv;
  if (!opts.out.empty()) {
    csv.open(opts.out, std::ios::trunc);
    if (!csv) throw IoError("cannot open predictions CSV for writing: " + opts.out);
    csv << "path,true_view,predicted_view,error\n";
  }

  Rng rng(opts.seed);
  double abs_sum = 0.0;
  for (Index i = 0; i < set.images.size(); ++i) {
    const ManifestRecord& rec = set.manifest.records[i];
    const ViewEstimate est = estimate_view(set.images[i], params, opts.samples, rng, labels);
    const double predicted = params.arch.view_head == ViewHeadKind::Discrete
                                 ? candidate_degrees[static_cast<Index>(std::lround(est.view))]
                                 : est.view * 90.0;
    const double error = predicted - rec.yaw;
    abs_sum += std::abs(error);
    if (csv.is_open()) {
      csv << rec.path << "," << format_degrees(rec.yaw) << "," << format_degrees(predicted) << ","
          << format_degrees(error) << "\n";
    }
  }
  if (csv.is_open() && !csv) throw IoError("short predictions write: " + opts.out);
  std::printf("MAE %.6f degrees over %zu images\n",
              abs_sum / static_cast<double>(set.images.size()), set.images.size());
  return 0;
}

struct EvalOpts {
  std::string protocol;
  std::string ckpt;
  std::string data;
  std::string out;
  std::string features = "raw,h_id_1,h_id_2,h_r_3,h_r_4";
  std::string metrics;
  std::string metrics_one_sample;
  std::string work_dir;
  std::string hidden;
  Index train_identities = 30;
  Index samples = 20;
  std::uint64_t seed = 11;
  double lambda = -1.0;
  Index pca_dims = 32;
  // interpolation protocol
  std::uint64_t data_seed = 77;
  Index identities = 12;
  Index illums = 1;
  Index size = 32;
  TrainConfig train;
};

void load_split(const EvalOpts& opts, Parameters& params, EvalSet& train, EvalSet& test) {
  if (opts.ckpt.empty()) throw ContractError("this protocol needs --ckpt");
  if (opts.data.empty()) throw ContractError("this protocol needs --data");
  params = load_checkpoint(opts.ckpt);
  const DatasetManifest manifest = read_manifest((fs::path(opts.data) / "manifest.txt").string());
  if (opts.train_identities == 0 || opts.train_identities >= manifest.identity_count) {
    throw ContractError("--train-identities must split the manifest identities");
  }
  train = load_eval_set(filter_identities(manifest, 0, opts.train_identities), opts.data);
  test = load_eval_set(filter_identities(manifest, opts.train_identities,
                                         manifest.identity_count),
                       opts.data);
}

int run_eval(const EvalOpts& opts) {
  EvalReport report;
  if (opts.protocol == "recognition") {
    Parameters params;
    EvalSet train, test;
    load_split(opts, params, train, test);
    std::vector<FeatureKind> kinds;
    std::size_t at = 0;
    const std::string& csv = opts.features;
    while (at <= csv.size()) {
      const std::size_t comma = csv.find(',', at);
      kinds.push_back(parse_feature_kind(
          csv.substr(at, comma == std::string::npos ? comma : comma - at)));
      if (comma == std::string::npos) break;
      at = comma + 1;
    }
    report = recognition_across_views(params, train, test, kinds, opts.lambda);
  } else if (opts.protocol == "recon-quality") {
    Parameters params;
    EvalSet train, test;
    load_split(opts, params, train, test);
    report = reconstruction_quality(params, train, test, opts.samples, opts.seed);
  } else if (opts.protocol == "view-error") {
    Parameters params;
    EvalSet train, test;
    load_split(opts, params, train, test);
    report = view_estimation_error(params, train, test, opts.samples, opts.seed, opts.pca_dims);
  } else if (opts.protocol == "interpolation") {
    InterpolationConfig config;
    config.work_dir = opts.work_dir;
    config.data_seed = opts.data_seed;
    config.identities = opts.identities;
    config.illums = opts.illums;
    config.size = opts.size;
    config.hidden_spec = opts.hidden;
    config.train = opts.train;
    report = interpolation_experiment(config);
  } else if (opts.protocol == "sparsity") {
    if (opts.metrics.empty()) throw ContractError("sparsity protocol needs --metrics");
    const std::vector<EpochMetrics> weighted = read_metrics_csv(opts.metrics);
    if (opts.metrics_one_sample.empty()) {
      report = sparsity_report(weighted);
    } else {
      const std::vector<EpochMetrics> os = read_metrics_csv(opts.metrics_one_sample);
      report = sparsity_report(weighted, &os);
    }
  } else {
    throw ContractError("unknown protocol: " + opts.protocol);
  }

  std::fputs(report_summary(report).c_str(), stdout);
  if (!opts.out.empty()) {
    write_report_csv(report, opts.out);
    std::printf("report: %s\n", opts.out.c_str());
  }
  return 0;
}

struct GradcheckOpts {
  std::uint64_t seed = 7;
  Index samples = 5;
  double h = 1e-5;
};

int run_gradcheck(const GradcheckOpts& opts) {
  constexpr double kTolerance = 1e-4;
  const char* tiny_spec = "8,8(3),8(3),12,16";
  Rng rng(opts.seed);

  TrainingPair pair;
  pair.x = Matrix(16, 1);
  rng.fill_uniform(pair.x, -0.5, 0.5);
  pair.y_hat = Matrix(16, 1);
  rng.fill_uniform(pair.y_hat, -0.5, 0.5);
  const Index true_class = rng.uniform_index(3);
  const double true_yaw = rng.uniform(-0.5, 0.5);

  struct Case {
    const char* name;
    ViewHeadKind head;
    GradMode mode;
    bool unsupervised;
  };
  const Case cases[] = {
      {"one-sample/discrete", ViewHeadKind::Discrete, GradMode::OneSample, false},
      {"one-sample/continuous", ViewHeadKind::Continuous, GradMode::OneSample, false},
      {"weighted/discrete", ViewHeadKind::Discrete, GradMode::WeightedAverage, false},
      {"weighted/continuous", ViewHeadKind::Continuous, GradMode::WeightedAverage, false},
      {"unsupervised/continuous", ViewHeadKind::Continuous, GradMode::OneSample, true},
  };

  double worst = 0.0;
  for (const Case& c : cases) {
    const Architecture arch = make_architecture(
        16, tiny_spec, c.head, c.head == ViewHeadKind::Discrete ? 3 : 0);
    Parameters params = init_parameters(arch, rng.next_u64());

    TrainingPair case_pair = pair;
    if (c.head == ViewHeadKind::Discrete) {
      case_pair.view_target = Matrix(3, 1);
      case_pair.view_target[true_class] = 1.0;
    } else {
      case_pair.view_target = Matrix::column({true_yaw});
    }

    const std::vector<ViewSample> samples = sample_view_codes(arch, opts.samples, rng);
    Objective objective;
    objective.mode = c.mode;
    objective.unsupervised = c.unsupervised;

    LossAndGrad analytic;
    FrozenDraw frozen;
    if (c.unsupervised) {
      objective.v_tilde = true_yaw;
      objective.sigma_vtilde = 0.2;
      const std::vector<Matrix> prefix = extract_identity(case_pair.x, params);
      std::vector<double> drawn(samples.size());
      for (Index s = 0; s < samples.size(); ++s) {
        const ForwardTrace trace = forward_given_sample(prefix, samples[s], params);
        drawn[s] = rng.gaussian(trace.view_out[0], params.sigma_v);
      }
      analytic = unsupervised_with_draws(case_pair, objective.v_tilde, objective.sigma_vtilde,
                                         params, samples, drawn);
      frozen = freeze_draw(case_pair, params, samples, objective, drawn);
    } else {
      analytic = loss_and_grad_with_samples(case_pair, params, samples, c.mode);
      frozen = freeze_draw(case_pair, params, samples, objective);
    }
    const Parameters fd = finite_diff_gradient(case_pair, params, frozen, objective, opts.h);

    for (const TensorCheck& check : compare_gradients(analytic.grad, fd)) {
      std::printf("%-24s %-8s max rel err %.3e\n", c.name, check.name.c_str(),
                  check.max_rel_err);
      worst = std::max(worst, check.max_rel_err);
    }
  }
  std::printf("worst relative error: %.3e (tolerance %g)\n", worst, kTolerance);
  if (!(worst < kTolerance)) {
    std::fprintf(stderr, "gradient check FAILED\n");
    return 3;
  }
  std::printf("gradient check passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view perceptron: data generation, training, inference, evaluation"};
  app.require_subcommand(1);

  GenDataOpts gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "render a synthetic multi-view dataset");
  gen_cmd->add_option("--out", gen.out, "dataset root directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "dataset seed");
  gen_cmd->add_option("--identities", gen.identities, "number of identities");
  gen_cmd->add_option("--views", gen.views, "comma-separated yaw degrees");
  gen_cmd->add_option("--illums", gen.illums, "number of illumination gains");
  gen_cmd->add_option("--size", gen.size, "image side length in pixels");
  gen_cmd->add_option("--blob-std", gen.blob_std, "landmark splat stddev in pixels");

  TrainOpts tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a generated dataset");
  train_cmd->add_option("--config", tr.config, "plain key=value file; command-line flags win");
  train_cmd->add_option("--data", tr.data, "dataset root (contains manifest.txt)")->required();
  train_cmd->add_option("--out", tr.out, "output directory for checkpoints/metrics")->required();
  train_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
  train_cmd->add_option("--hidden", tr.hidden, "hidden-layer spec");
  train_cmd->add_option("--grad-mode", tr.grad_mode, "gradient estimator")
      ->check(CLI::IsMember({"one-sample", "weighted"}));
  train_cmd->add_option("--view-head", tr.view_head, "view-label model")
      ->check(CLI::IsMember({"discrete", "continuous"}));
  train_cmd->add_option("--pairing", tr.pairing, "training pair construction")
      ->check(CLI::IsMember({"all", "frontal"}));
  train_cmd->add_option("--train-identities", tr.train_identities,
                        "train on the first N identities (0 = all)");
  train_cmd->add_flag("--unsupervised", tr.unsupervised, "train without view labels");
  train_cmd->add_option("--clusters", tr.clusters, "view clusters for unsupervised init");
  train_cmd->add_option("--sigma-vtilde", tr.sigma_vtilde, "unsupervised view-prior stddev");
  train_cmd->add_option("--samples", tr.train.samples, "Monte Carlo samples per pair");
  train_cmd->add_option("--lr", tr.train.learning_rate, "SGD learning rate");
  train_cmd->add_option("--momentum", tr.train.momentum, "SGD momentum");
  train_cmd->add_option("--epochs", tr.train.epochs, "training epochs");
  train_cmd->add_option("--batch-size", tr.train.batch_size, "minibatch size");
  train_cmd->add_option("--seed", tr.train.seed, "training seed");
  train_cmd->add_option("--sigma-y", tr.train.sigma_y, "reconstruction stddev");
  train_cmd->add_option("--sigma-v", tr.train.sigma_v, "continuous view stddev");

  ReconstructOpts rec;
  CLI::App* rec_cmd = app.add_subcommand("reconstruct", "render the multi-view spectrum");
  rec_cmd->add_option("--ckpt", rec.ckpt, "model checkpoint")->required();
  rec_cmd->add_option("--input", rec.input, "input PGM image")->required();
  rec_cmd->add_option("--out", rec.out, "output directory")->required();
  rec_cmd->add_option("--views", rec.views,
                      "'all', or comma-separated labels (degrees; class indices when discrete)");
  rec_cmd->add_option("--samples", rec.samples, "Monte Carlo samples per view");
  rec_cmd->add_option("--seed", rec.seed, "sampling seed");

  EstimateViewOpts est;
  CLI::App* est_cmd = app.add_subcommand("estimate-view", "predict the view of dataset images");
  est_cmd->add_option("--ckpt", est.ckpt, "model checkpoint")->required();
  est_cmd->add_option("--data", est.data, "dataset root")->required();
  est_cmd->add_option("--out", est.out, "per-image predictions CSV");
  est_cmd->add_option("--candidates", est.candidates, "candidate views in degrees");
  est_cmd->add_option("--samples", est.samples, "Monte Carlo samples per candidate");
  est_cmd->add_option("--seed", est.seed, "sampling seed");

  EvalOpts ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "run an evaluation protocol");
  eval_cmd
      ->add_option("protocol", ev.protocol,
                   "recognition|recon-quality|view-error|interpolation|sparsity")
      ->required();
  eval_cmd->add_option("--ckpt", ev.ckpt, "model checkpoint");
  eval_cmd->add_option("--data", ev.data, "dataset root");
  eval_cmd->add_option("--out", ev.out, "report CSV path");
  eval_cmd->add_option("--features", ev.features, "feature rows for recognition");
  eval_cmd->add_option("--train-identities", ev.train_identities,
                       "identities reserved for LDA fitting");
  eval_cmd->add_option("--samples", ev.samples, "Monte Carlo samples");
  eval_cmd->add_option("--seed", ev.seed, "protocol seed");
  eval_cmd->add_option("--lambda", ev.lambda, "LDA regularization (<=0 selects auto)");
  eval_cmd->add_option("--pca-dims", ev.pca_dims, "PCA coefficients for the LR baseline");
  eval_cmd->add_option("--metrics", ev.metrics, "metrics CSV (sparsity protocol)");
  eval_cmd->add_option("--metrics-one-sample", ev.metrics_one_sample,
                       "one-sample metrics CSV for the loss-ratio comparison");
  eval_cmd->add_option("--work-dir", ev.work_dir, "scratch directory (interpolation)");
  eval_cmd->add_option("--hidden", ev.hidden, "hidden spec (interpolation)");
  eval_cmd->add_option("--data-seed", ev.data_seed, "dataset seed (interpolation)");
  eval_cmd->add_option("--identities", ev.identities, "identities (interpolation)");
  eval_cmd->add_option("--illums", ev.illums, "illumination gains (interpolation)");
  eval_cmd->add_option("--size", ev.size, "image side length (interpolation)");
  eval_cmd->add_option("--epochs", ev.train.epochs, "training epochs (interpolation)");
  eval_cmd->add_option("--lr", ev.train.learning_rate, "learning rate (interpolation)");
  eval_cmd->add_option("--momentum", ev.train.momentum, "momentum (interpolation)");
  eval_cmd->add_option("--batch-size", ev.train.batch_size, "batch size (interpolation)");
  eval_cmd->add_option("--train-seed", ev.train.seed, "training seed (interpolation)");

  GradcheckOpts gc;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "verify analytic gradients on a tiny net");
  gc_cmd->add_option("--seed", gc.seed, "construction seed");
  gc_cmd->add_option("--samples", gc.samples, "Monte Carlo samples");
  gc_cmd->add_option("--fd-step", gc.h, "finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (train_cmd->parsed()) {
      if (!tr.config.empty()) apply_config_file(train_cmd, tr.config);
      return run_train(tr);
    }
    if (rec_cmd->parsed()) return run_reconstruct(rec);
    if (est_cmd->parsed()) return run_estimate_view(est);
    if (eval_cmd->parsed()) {
      ev.train.samples = ev.samples;
      ev.train.seed = ev.train.seed == 0 ? ev.seed : ev.train.seed;
      return run_eval(ev);
    }
    if (gc_cmd->parsed()) return run_gradcheck(gc);
  } catch (const VerificationError& e) {
    std::fprintf(stderr, "verification error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
