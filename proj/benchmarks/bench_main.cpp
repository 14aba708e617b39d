#include <benchmark/benchmark.h>

#include "mvp/linalg.hpp"
#include "mvp/network.hpp"
#include "mvp/rng.hpp"
#include "mvp/synthdata.hpp"
#include "mvp/training.hpp"

namespace {

using namespace mvp;

void BM_GemmNN(benchmark::State& state) {
  const Index n = static_cast<Index>(state.range(0));
  Rng rng(1);
  Matrix a = uniform(rng, n, n);
  Matrix b = uniform(rng, n, n);
  Matrix c(n, n);
  for (auto _ : state) {
    gemm_nn(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["gflops"] = benchmark::Counter(
      2.0 * static_cast<double>(n) * n * n * static_cast<double>(state.iterations()),
      benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}
BENCHMARK(BM_GemmNN)->Arg(256)->Arg(512)->Arg(1024);

void BM_ForwardPass(benchmark::State& state) {
  const Architecture arch = make_architecture(1024, kDefaultHiddenSpec, ViewHeadKind::Discrete, 7);
  const Parameters params = init_parameters(arch, 5);
  Rng rng(9);
  Matrix x(1024, 1);
  rng.fill_uniform(x, -0.5, 0.5);
  const std::vector<ViewSample> samples = sample_view_codes(arch, 1, rng);
  for (auto _ : state) {
    ForwardTrace trace = forward_pass(x, samples[0], params);
    benchmark::DoNotOptimize(trace.y_mean.data());
  }
}
BENCHMARK(BM_ForwardPass);

void BM_TrainEpoch(benchmark::State& state) {
  const Index pairs_n = static_cast<Index>(state.range(0));
  const Architecture arch = make_architecture(1024, kDefaultHiddenSpec, ViewHeadKind::Discrete, 7);
  Parameters params = init_parameters(arch, 5);
  OptimizerState opt = OptimizerState::init(params);
  TrainConfig config;
  config.samples = 20;
  config.batch_size = 16;
  config.epochs = 1;
  Rng rng(11);
  std::vector<TrainingPair> pairs(pairs_n);
  for (TrainingPair& pair : pairs) {
    pair.x = Matrix(1024, 1);
    rng.fill_uniform(pair.x, -0.5, 0.5);
    pair.y_hat = Matrix(1024, 1);
    rng.fill_uniform(pair.y_hat, -0.5, 0.5);
    pair.view_target = Matrix(7, 1);
    pair.view_target[rng.uniform_index(7)] = 1.0;
  }
  for (auto _ : state) {
    EpochMetrics m = train_epoch(pairs, params, opt, config, rng);
    benchmark::DoNotOptimize(m.mean_loss);
  }
  state.counters["pairs_per_s"] = benchmark::Counter(
      static_cast<double>(pairs_n) * static_cast<double>(state.iterations()),
      benchmark::Counter::kIsRate);
}
BENCHMARK(BM_TrainEpoch)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_RenderView(benchmark::State& state) {
  const IdentitySpec spec = generate_identity(3, 0);
  RenderParams render;
  render.yaw_degrees = 30.0;
  for (auto _ : state) {
    Matrix image = render_view(spec, render);
    benchmark::DoNotOptimize(image.data());
  }
}
BENCHMARK(BM_RenderView);

void BM_SymEigh(benchmark::State& state) {
  const Index n = static_cast<Index>(state.range(0));
  Rng rng(17);
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  for (auto _ : state) {
    EighResult r = sym_eigh(a);
    benchmark::DoNotOptimize(r.values.data());
  }
}
BENCHMARK(BM_SymEigh)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
