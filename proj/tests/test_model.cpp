#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mvp/errors.hpp"
#include "mvp/linalg.hpp"
#include "mvp/network.hpp"
#include "mvp/parameters.hpp"
#include "mvp/rng.hpp"

using namespace mvp;

namespace {

const char* kTinySpec = "3,3(2),3(2),4,4";

Architecture tiny_arch(ViewHeadKind head) {
  return make_architecture(4, kTinySpec, head, head == ViewHeadKind::Discrete ? 3 : 0);
}

Matrix random_column(Rng& rng, Index n) {
  Matrix x(n, 1);
  rng.fill_uniform(x, -0.5, 0.5);
  return x;
}

// Scalar-loop forward pass written independently of the library kernels.
struct NaiveForward {
  std::vector<Matrix> h;
  Matrix y;
  Matrix view;
};

NaiveForward naive_forward(const Matrix& x, const ViewSample& sample, const Parameters& p) {
  NaiveForward out;
  const Matrix* below = &x;
  for (Index l = 0; l < p.layers.size(); ++l) {
    const LayerParams& lp = p.layers[l];
    Matrix z(lp.U.rows(), 1);
    for (Index i = 0; i < lp.U.rows(); ++i) {
      double acc = lp.b[i];
      for (Index j = 0; j < lp.U.cols(); ++j) acc += lp.U(i, j) * (*below)[j];
      if (!lp.V.empty()) {
        const Matrix& code = sample.codes[l - 1];
        for (Index j = 0; j < lp.V.cols(); ++j) acc += lp.V(i, j) * code[j];
      }
      z[i] = 1.0 / (1.0 + std::exp(-acc));
    }
    out.h.push_back(z);
    below = &out.h.back();
  }
  out.y = Matrix(p.U_out.rows(), 1);
  for (Index i = 0; i < p.U_out.rows(); ++i) {
    double acc = p.b_out[i];
    for (Index j = 0; j < p.U_out.cols(); ++j) acc += p.U_out(i, j) * (*below)[j];
    if (!p.V_out.empty()) {
      const Matrix& code = sample.codes.back();
      for (Index j = 0; j < p.V_out.cols(); ++j) acc += p.V_out(i, j) * code[j];
    }
    out.y[i] = acc;
  }
  const Matrix ccat = sample.concatenated(p.arch);
  out.view = Matrix(p.W_y.rows(), 1);
  for (Index i = 0; i < p.W_y.rows(); ++i) {
    double acc = p.b_view[i];
    for (Index j = 0; j < p.W_y.cols(); ++j) acc += p.W_y(i, j) * out.y[j];
    for (Index j = 0; j < p.W_v.cols(); ++j) acc += p.W_v(i, j) * ccat[j];
    out.view[i] = acc;
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (Index i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("architecture: default hidden spec parses to the published topology") {
  const auto layers = parse_hidden_spec(kDefaultHiddenSpec);
  REQUIRE(layers.size() == 5);
  CHECK(layers[0] == LayerSpec{512, 0});
  CHECK(layers[1] == LayerSpec{512, 10});
  CHECK(layers[2] == LayerSpec{512, 10});
  CHECK(layers[3] == LayerSpec{1024, 0});
  CHECK(layers[4] == LayerSpec{1024, 0});

  const Architecture arch = make_architecture(1024, kDefaultHiddenSpec, ViewHeadKind::Discrete, 7);
  CHECK(arch.input_dim == 1024);
  CHECK(arch.output_dim == 1024);
  CHECK(arch.view_code_dim() == 20);
  CHECK(arch.hybrid_layer_indices() == std::vector<Index>{1, 2});
  CHECK(arch.view_out_dim() == 7);
  CHECK(identity_prefix_len(arch) == 2);
}

TEST_CASE("architecture: malformed specs and invalid heads are rejected") {
  CHECK_THROWS_AS(parse_hidden_spec(""), ParseError);
  CHECK_THROWS_AS(parse_hidden_spec("8,,8"), ParseError);
  CHECK_THROWS_AS(parse_hidden_spec("8(x)"), ParseError);
  CHECK_THROWS_AS(parse_hidden_spec("8(3"), ParseError);
  CHECK_THROWS_AS(parse_hidden_spec("0"), ParseError);
  CHECK_THROWS_AS(make_architecture(16, "8,8", ViewHeadKind::Discrete, 1), ContractError);
  CHECK_THROWS_AS(make_architecture(0, "8,8", ViewHeadKind::Discrete, 3), ContractError);
}

TEST_CASE("init_parameters: reproducible, zero biases, fan-in scaled weights") {
  const Architecture arch = make_architecture(1024, kDefaultHiddenSpec, ViewHeadKind::Discrete, 7);
  const Parameters a = init_parameters(arch, 5);
  const Parameters b = init_parameters(arch, 5);
  bool identical = true;
  a.for_each_tensor([&](const std::string& name, const Matrix& m) {
    b.for_each_tensor([&](const std::string& other, const Matrix& n) {
      if (name == other && !(m == n)) identical = false;
    });
  });
  CHECK(identical);
  CHECK(a.sigma_y == 1.0);
  CHECK(a.sigma_v == 0.1);

  for (Index i = 0; i < a.layers[0].b.size(); ++i) CHECK(a.layers[0].b[i] == 0.0);
  for (Index i = 0; i < a.b_view.size(); ++i) CHECK(a.b_view[i] == 0.0);

  // layers[1].U has fan-in 512: std should sit near 1/sqrt(512) = 0.0442
  const Matrix& u = a.layers[1].U;
  REQUIRE(u.cols() == 512);
  double total = 0.0, total_sq = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    total += u[i];
    total_sq += u[i] * u[i];
  }
  const double mean = total / u.size();
  const double stddev = std::sqrt(total_sq / u.size() - mean * mean);
  CHECK(stddev >= 0.040);
  CHECK(stddev <= 0.048);
}

TEST_CASE("init_parameters: default architecture parameter count by shape arithmetic") {
  const Architecture arch = make_architecture(1024, kDefaultHiddenSpec, ViewHeadKind::Discrete, 7);
  const Parameters p = init_parameters(arch, 1);
  const Index expected = (512 * 1024 + 512)             // U1, b1
                         + (512 * 512 + 512)            // U2, b2
                         + (512 * 512 + 512 * 10 + 512) // U3, V3, b3
                         + (1024 * 512 + 1024 * 10 + 1024)
                         + (1024 * 1024 + 1024)
                         + (1024 * 1024 + 1024)         // output layer
                         + (7 * 1024 + 7 * 20 + 7);     // view head
  CHECK(p.parameter_count() == expected);
  CHECK(p.all_finite());
  CHECK(p.V_out.empty());  // last hidden layer has no random units
}

TEST_CASE("extract_identity: deterministic and ignorant of view samples") {
  Rng rng(8);
  const Architecture arch = tiny_arch(ViewHeadKind::Discrete);
  const Parameters p = init_parameters(arch, 9);
  const Matrix x = random_column(rng, 4);

  const auto id1 = extract_identity(x, p);
  const auto id2 = extract_identity(x, p);
  REQUIRE(id1.size() == 2);
  CHECK(id1[0] == id2[0]);
  CHECK(id1[1] == id2[1]);

  auto samples = sample_view_codes(arch, 2, rng);
  const ForwardTrace t0 = forward_given_sample(id1, samples[0], p);
  const ForwardTrace t1 = forward_given_sample(id1, samples[1], p);
  CHECK(t0.h[0] == id1[0]);
  CHECK(t0.h[1] == id1[1]);
  CHECK(t1.h[0] == id1[0]);
  CHECK(t1.h[1] == id1[1]);
}

TEST_CASE("extract_identity: zero input with zero weights gives 0.5 activations") {
  const Architecture arch = tiny_arch(ViewHeadKind::Discrete);
  const Parameters p = Parameters::zeros(arch);
  const auto id = extract_identity(Matrix(4, 1), p);
  for (const Matrix& layer : id)
    for (Index i = 0; i < layer.size(); ++i) CHECK(layer[i] == 0.5);
}

TEST_CASE("sample_view_codes: shapes, range, reproducibility, mean") {
  const Architecture arch = make_architecture(1024, kDefaultHiddenSpec, ViewHeadKind::Discrete, 7);
  Rng rng(10);
  const auto one = sample_view_codes(arch, 1, rng);
  REQUIRE(one.size() == 1);
  REQUIRE(one[0].codes.size() == 5);
  CHECK(one[0].codes[0].empty());
  CHECK(one[0].codes[1].rows() == 10);
  CHECK(one[0].codes[2].rows() == 10);
  CHECK(one[0].codes[3].empty());
  CHECK(one[0].concatenated(arch).rows() == 20);

  Rng ra(33), rb(33);
  const auto sa = sample_view_codes(arch, 3, ra);
  const auto sb = sample_view_codes(arch, 3, rb);
  for (Index s = 0; s < 3; ++s) {
    CHECK(sa[s].codes[1] == sb[s].codes[1]);
    CHECK(sa[s].codes[2] == sb[s].codes[2]);
  }

  Rng rc(77);
  const auto big = sample_view_codes(arch, 500, rc);
  double total = 0.0;
  Index count = 0;
  for (const auto& s : big)
    for (const Matrix* code : {&s.codes[1], &s.codes[2]})
      for (Index i = 0; i < code->size(); ++i) {
        const double v = (*code)[i];
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
        total += v;
        ++count;
      }
  REQUIRE(count == 10000);
  const double mean = total / count;
  CHECK(mean >= 0.49);
  CHECK(mean <= 0.51);
}

TEST_CASE("forward_given_sample: sample-dependence and determinism") {
  const Architecture arch = tiny_arch(ViewHeadKind::Discrete);
  const Parameters p = init_parameters(arch, 14);
  Rng rng(15);
  const Matrix x = random_column(rng, 4);
  auto samples = sample_view_codes(arch, 2, rng);

  const ForwardTrace a = forward_pass(x, samples[0], p);
  const ForwardTrace b = forward_pass(x, samples[1], p);
  const ForwardTrace a2 = forward_pass(x, samples[0], p);
  CHECK(max_abs_diff(a.y_mean, b.y_mean) > 1e-9);
  CHECK(a.y_mean == a2.y_mean);
  CHECK(a.view_out == a2.view_out);

  for (const Matrix& h : a.h)
    for (Index i = 0; i < h.size(); ++i) {
      CHECK(h[i] > 0.0);
      CHECK(h[i] < 1.0);
    }
}

TEST_CASE("forward_given_sample: tiny net matches the scalar-loop oracle") {
  for (ViewHeadKind head : {ViewHeadKind::Discrete, ViewHeadKind::Continuous}) {
    const Architecture arch = tiny_arch(head);
    const Parameters p = init_parameters(arch, 16);
    Rng rng(17);
    const Matrix x = random_column(rng, 4);
    const auto samples = sample_view_codes(arch, 1, rng);
    const ForwardTrace trace = forward_pass(x, samples[0], p);
    const NaiveForward naive = naive_forward(x, samples[0], p);

    REQUIRE(trace.h.size() == naive.h.size());
    for (Index l = 0; l < trace.h.size(); ++l) CHECK(max_abs_diff(trace.h[l], naive.h[l]) <= 1e-12);
    CHECK(max_abs_diff(trace.y_mean, naive.y) <= 1e-12);
    CHECK(max_abs_diff(trace.view_out, naive.view) <= 1e-12);
  }
}

TEST_CASE("recon_loglik: fixed points, oracle, monotone decay, errors") {
  const Matrix zero(4, 1);
  CHECK(recon_loglik(zero, zero, 1.0) == 0.0);

  Matrix unit(4, 1);
  unit[0] = 1.0;
  CHECK(recon_loglik(unit, zero, 1.0) == doctest::Approx(-0.5).epsilon(1e-14));

  Rng rng(18);
  const Matrix y_hat = random_column(rng, 6);
  const Matrix y_mean = random_column(rng, 6);
  const double sigma = 0.7;
  double ss = 0.0;
  for (Index i = 0; i < 6; ++i) ss += (y_hat[i] - y_mean[i]) * (y_hat[i] - y_mean[i]);
  const double want = -6.0 * std::log(sigma) - ss / (2.0 * sigma * sigma);
  CHECK(recon_loglik(y_hat, y_mean, sigma) == doctest::Approx(want).epsilon(1e-12));

  // strictly decreasing in the residual norm at fixed sigma
  Matrix near = y_mean, far = y_mean;
  near[0] += 0.1;
  far[0] += 0.2;
  CHECK(recon_loglik(near, y_mean, 1.0) > recon_loglik(far, y_mean, 1.0));

  CHECK_THROWS_AS(recon_loglik(zero, zero, 0.0), ContractError);
  CHECK_THROWS_AS(recon_loglik(zero, Matrix(3, 1), 1.0), DimensionError);
}

TEST_CASE("view_loglik_discrete: uniform, saturated, oracle, one-hot contract") {
  Matrix onehot(7, 1);
  onehot[2] = 1.0;
  CHECK(view_loglik_discrete(onehot, Matrix(7, 1)) ==
        doctest::Approx(std::log(1.0 / 7.0)).epsilon(1e-12));

  Matrix logits(7, 1);
  logits[2] = 1000.0;
  CHECK(view_loglik_discrete(onehot, logits) == doctest::Approx(0.0).epsilon(1e-12));

  Matrix v3(3, 1);
  v3[1] = 1.0;
  const Matrix l3 = Matrix::from_rows({{1.0}, {2.0}, {3.0}});
  const long double z = expl(1.0L) + expl(2.0L) + expl(3.0L);
  const double want = static_cast<double>(logl(expl(2.0L) / z));
  CHECK(view_loglik_discrete(v3, l3) == doctest::Approx(want).epsilon(1e-13));
  CHECK(view_loglik_discrete(v3, l3) < 0.0);

  Matrix not_onehot(3, 1);
  not_onehot[0] = 0.5;
  not_onehot[1] = 0.5;
  CHECK_THROWS_AS(view_loglik_discrete(not_onehot, l3), ContractError);
}

TEST_CASE("view_loglik_continuous: fixed points and contract") {
  CHECK(view_loglik_continuous(0.3, 0.3, 1.0) == 0.0);
  CHECK(view_loglik_continuous(0.4, 0.3, 0.1) ==
        doctest::Approx(-std::log(0.1) - 0.5).epsilon(1e-13));
  const double want = -std::log(0.25) - (0.7 * 0.7) / (2.0 * 0.25 * 0.25);
  CHECK(view_loglik_continuous(1.0, 0.3, 0.25) == doctest::Approx(want).epsilon(1e-13));
  CHECK_THROWS_AS(view_loglik_continuous(0.0, 0.0, 0.0), ContractError);
  CHECK_THROWS_AS(view_loglik_continuous(0.0, 0.0, -1.0), ContractError);
}

TEST_CASE("importance_weights: normalization, ties, extended-precision oracle") {
  const Architecture arch = tiny_arch(ViewHeadKind::Discrete);
  const Parameters p = init_parameters(arch, 20);
  Rng rng(21);
  const Matrix x = random_column(rng, 4);
  const Matrix y_hat = random_column(rng, 4);
  Matrix v_hat(3, 1);
  v_hat[1] = 1.0;

  auto samples = sample_view_codes(arch, 1, rng);
  const SampleSet single = importance_weights(x, y_hat, v_hat, samples, p);
  CHECK(single.weights == std::vector<double>{1.0});
  CHECK(single.argmax == 0);

  // identical pair of samples: exact tie, argmax stays at the lowest index
  std::vector<ViewSample> dup = {samples[0], samples[0]};
  const SampleSet tied = importance_weights(x, y_hat, v_hat, dup, p);
  CHECK(tied.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tied.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tied.argmax == 0);

  auto five = sample_view_codes(arch, 5, rng);
  const SampleSet set = importance_weights(x, y_hat, v_hat, five, p);
  REQUIRE(set.weights.size() == 5);

  // cached log-weights must equal recon + view log-likelihoods
  for (Index s = 0; s < 5; ++s) {
    const ForwardTrace t = forward_pass(x, five[s], p);
    const double lw = recon_loglik(y_hat, t.y_mean, p.sigma_y) +
                      view_loglik_discrete(v_hat, t.view_out);
    CHECK(set.samples[s].log_weight == doctest::Approx(lw).epsilon(1e-12));
  }

  // extended-precision normalization oracle
  long double zsum = 0.0L;
  long double mx = set.samples[0].log_weight;
  for (Index s = 1; s < 5; ++s) mx = std::max<long double>(mx, set.samples[s].log_weight);
  for (Index s = 0; s < 5; ++s) zsum += expl(static_cast<long double>(set.samples[s].log_weight) - mx);
  double total = 0.0;
  Index want_argmax = 0;
  for (Index s = 0; s < 5; ++s) {
    const double want =
        static_cast<double>(expl(static_cast<long double>(set.samples[s].log_weight) - mx) / zsum);
    CHECK(std::fabs(set.weights[s] - want) <= 1e-10);
    CHECK(set.weights[s] >= 0.0);
    CHECK(set.weights[s] <= 1.0);
    total += set.weights[s];
    if (set.samples[s].log_weight > set.samples[want_argmax].log_weight) want_argmax = s;
  }
  CHECK(std::fabs(total - 1.0) <= 1e-12);
  CHECK(set.argmax == want_argmax);
}

TEST_CASE("importance_weights: adding a sample never lowers the max log-weight") {
  const Architecture arch = tiny_arch(ViewHeadKind::Continuous);
  const Parameters p = init_parameters(arch, 24);
  Rng rng(25);
  const Matrix x = random_column(rng, 4);
  const Matrix y_hat = random_column(rng, 4);
  const Matrix v_hat = Matrix::column({0.25});

  auto pool = sample_view_codes(arch, 8, rng);
  double prev_max = -std::numeric_limits<double>::infinity();
  std::vector<ViewSample> grow;
  for (const auto& s : pool) {
    grow.push_back(s);
    const SampleSet set = importance_weights(x, y_hat, v_hat, grow, p);
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& ws : set.samples) mx = std::max(mx, ws.log_weight);
    CHECK(mx >= prev_max);
    prev_max = mx;
  }
}

TEST_CASE("reconstruct_spectrum: coverage, degenerate S, reproducibility, argmax oracle") {
  for (ViewHeadKind head : {ViewHeadKind::Discrete, ViewHeadKind::Continuous}) {
    const Architecture arch = tiny_arch(head);
    const Parameters p = init_parameters(arch, 30);
    Rng seed_rng(31);
    const Matrix x = random_column(seed_rng, 4);
    const std::vector<double> labels = head == ViewHeadKind::Discrete
                                           ? std::vector<double>{0, 1, 2}
                                           : std::vector<double>{-0.5, 0.0, 0.5};

    Rng r1(40);
    const auto images = reconstruct_spectrum(x, labels, 6, p, r1);
    REQUIRE(images.size() == labels.size());

    Rng r2(40);
    const auto again = reconstruct_spectrum(x, labels, 6, p, r2);
    for (Index i = 0; i < images.size(); ++i) CHECK(images[i] == again[i]);

    // brute-force oracle over the same draw
    Rng r3(40);
    const auto samples = sample_view_codes(arch, 6, r3);
    std::vector<Matrix> ys(6), outs(6);
    for (Index s = 0; s < 6; ++s) {
      ForwardTrace t = forward_pass(x, samples[s], p);
      ys[s] = t.y_mean;
      outs[s] = t.view_out;
    }
    for (Index li = 0; li < labels.size(); ++li) {
      Index best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (Index s = 0; s < 6; ++s) {
        double score;
        if (head == ViewHeadKind::Discrete) {
          score = log_softmax(outs[s])[static_cast<Index>(labels[li])];
        } else {
          const double r = labels[li] - outs[s][0];
          score = -r * r;
        }
        if (score > best_score) {
          best_score = score;
          best = s;
        }
      }
      CHECK(images[li] == ys[best]);
    }

    Rng r4(41);
    const auto one = reconstruct_spectrum(x, labels, 1, p, r4);
    for (Index i = 1; i < one.size(); ++i) CHECK(one[i] == one[0]);

    Rng r5(42);
    CHECK_THROWS_AS(reconstruct_spectrum(x, {}, 4, p, r5), ContractError);
  }
}

TEST_CASE("estimate_view: single candidate, exhaustive oracle, contract") {
  const Architecture arch = tiny_arch(ViewHeadKind::Continuous);
  const Parameters p = init_parameters(arch, 50);
  Rng rng(51);
  const Matrix x = random_column(rng, 4);

  Rng r1(52);
  const ViewEstimate only = estimate_view(x, p, 4, r1, {0.25});
  CHECK(only.view == 0.25);
  CHECK(only.view_feature.rows() == arch.view_code_dim());

  const std::vector<double> candidates = {-0.5, -0.25, 0.0, 0.25, 0.5};
  Rng r2(53);
  const ViewEstimate est = estimate_view(x, p, 8, r2, candidates);

  // oracle: replay the draw, pick per candidate the sample whose view output
  // is closest, then the candidate whose winning output is closest to x
  Rng r3(53);
  const auto samples = sample_view_codes(arch, 8, r3);
  double best_dist = std::numeric_limits<double>::infinity();
  double best_view = 0.0;
  for (double z : candidates) {
    Index win = 0;
    double win_err = std::numeric_limits<double>::infinity();
    std::vector<Matrix> ys(8);
    for (Index s = 0; s < 8; ++s) {
      ForwardTrace t = forward_pass(x, samples[s], p);
      ys[s] = t.y_mean;
      const double r = z - t.view_out[0];
      if (r * r < win_err) {
        win_err = r * r;
        win = s;
      }
    }
    const double dist = squared_distance(x, ys[win]);
    if (dist < best_dist) {
      best_dist = dist;
      best_view = z;
    }
  }
  CHECK(est.view == best_view);

  Rng r4(54);
  CHECK_THROWS_AS(estimate_view(x, p, 4, r4, {}), ContractError);
}

TEST_CASE("estimate_view: discrete head matches the response-gap oracle") {
  const Architecture arch = tiny_arch(ViewHeadKind::Discrete);
  const Parameters p = init_parameters(arch, 55);
  Rng rng(56);
  const Matrix x = random_column(rng, 4);
  const std::vector<double> candidates = {0, 1, 2};

  Rng r1(57);
  const ViewEstimate est = estimate_view(x, p, 6, r1, candidates);

  Rng r2(57);
  const auto samples = sample_view_codes(arch, 6, r2);
  double best_gap = std::numeric_limits<double>::infinity();
  double best_view = 0.0;
  for (double label : candidates) {
    const Index j = static_cast<Index>(label);
    for (Index s = 0; s < 6; ++s) {
      const ForwardTrace t = forward_pass(x, samples[s], p);
      // input-side response: view head applied to x in place of y
      const Matrix ccat = samples[s].concatenated(arch);
      Matrix logits(p.W_y.rows(), 1);
      for (Index i = 0; i < p.W_y.rows(); ++i) {
        double acc = p.b_view[i];
        for (Index c = 0; c < p.W_y.cols(); ++c) acc += p.W_y(i, c) * x[c];
        for (Index c = 0; c < p.W_v.cols(); ++c) acc += p.W_v(i, c) * ccat[c];
        logits[i] = acc;
      }
      const double g = softmax(logits)[j] - softmax(t.view_out)[j];
      if (g * g < best_gap) {
        best_gap = g * g;
        best_view = static_cast<double>(j);
      }
    }
  }
  CHECK(est.view == best_view);
}

TEST_CASE("lower_bound_estimate: perfectly fit pair sits at zero") {
  const Architecture arch = tiny_arch(ViewHeadKind::Discrete);
  Parameters p = Parameters::zeros(arch);
  Rng rng(60);
  TrainingPair pair;
  pair.x = random_column(rng, 4);
  pair.y_hat = random_column(rng, 4);
  pair.view_target = Matrix(3, 1);
  pair.view_target[0] = 1.0;

  // zero weights: y_mean == b_out for every sample; saturate the true class
  p.b_out = pair.y_hat;
  p.b_view[0] = 1000.0;

  Rng r1(61);
  const double elbo = lower_bound_estimate({pair}, 5, p, r1);
  CHECK(std::fabs(elbo) <= 1e-9);
}

TEST_CASE("lower_bound_estimate: untrained model is finite and negative; S=1 reduces") {
  const Architecture arch = tiny_arch(ViewHeadKind::Continuous);
  const Parameters p = init_parameters(arch, 62);
  Rng rng(63);
  TrainingPair pair;
  pair.x = random_column(rng, 4);
  pair.y_hat = random_column(rng, 4);
  pair.view_target = Matrix::column({0.5});

  Rng r1(64);
  const double elbo = lower_bound_estimate({pair}, 7, p, r1);
  CHECK(std::isfinite(elbo));
  CHECK(elbo < 0.0);

  Rng r2(65);
  const double single = lower_bound_estimate({pair}, 1, p, r2);
  Rng r3(65);
  const auto samples = sample_view_codes(arch, 1, r3);
  const ForwardTrace t = forward_pass(pair.x, samples[0], p);
  const double want = recon_loglik(pair.y_hat, t.y_mean, p.sigma_y) +
                      view_loglik_continuous(0.5, t.view_out[0], p.sigma_v);
  CHECK(single == doctest::Approx(want).epsilon(1e-12));
}
