#include <benchmark/benchmark.h>

#include <random>

#include "affect/heads.hpp"
#include "affect/losses.hpp"
#include "affect/metrics.hpp"
#include "affect/postprocess.hpp"
#include "affect/synthetic.hpp"
#include "affect/train.hpp"

using namespace affect;

namespace {

Eigen::MatrixXd random_batch(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 1);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return g(rng); });
}

std::vector<TaskPrediction> random_track(std::size_t n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<TaskPrediction> out(n);
  for (auto& p : out) {
    std::array<double, kNumExpressions> e{};
    double s = 0;
    for (auto& v : e) s += v = u(rng);
    for (auto& v : e) v /= s;
    p.expr_probs = e;
    std::array<double, kNumActionUnits> a{};
    for (auto& v : a) v = u(rng);
    p.au_probs = a;
    p.va = ValenceArousal{2 * u(rng) - 1, 2 * u(rng) - 1};
  }
  return out;
}

}  // namespace

// Batch forward + backward of the joint head, D = 1280 (embedding + scores input).
static void BM_ForwardBackward(benchmark::State& state) {
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  const auto arch = HeadArchitecture::for_task(Task::MultiTask, FeatureKind::Concatenated, 1280, 128);
  const auto model = init_head(arch, 1);
  const auto x = random_batch(batch, static_cast<Eigen::Index>(arch.input_dim));
  for (auto _ : state) {
    const auto fwd = forward_batch(model, x);
    OutputGradients g;
    g.expr_logits = fwd.expr_probs;
    g.va_pre = fwd.va;
    g.au_logits = fwd.au_probs;
    benchmark::DoNotOptimize(backward(model, x, fwd, g));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256);

static void BM_Smooth(benchmark::State& state) {
  const auto track = random_track(5000);
  const SmoothingConfig cfg{state.range(1) == 0 ? SmoothingKind::Mean : SmoothingKind::Median,
                            static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(smooth(track, cfg));
  state.SetItemsProcessed(state.iterations() * 5000);
}
BENCHMARK(BM_Smooth)->Args({5, 0})->Args({15, 0})->Args({5, 1})->Args({15, 1});

static void BM_MacroF1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::vector<int> pred(n), truth(n);
  for (std::size_t i = 0; i < n; ++i) pred[i] = static_cast<int>(rng() % 8), truth[i] = static_cast<int>(rng() % 8);
  for (auto _ : state) benchmark::DoNotOptimize(macro_f1(pred, truth));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MacroF1)->Arg(100000);

static void BM_CCC(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = g(rng), y[i] = 0.5 * x[i] + g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ccc(x, y));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CCC)->Arg(100000);

static void BM_TuneThresholds(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::array<double, kNumActionUnits>> probs(n);
  std::vector<AUVector> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < kNumActionUnits; ++a) {
      probs[i][a] = u(rng);
      labels[i][a] = static_cast<std::uint8_t>(u(rng) < probs[i][a]);
    }
  for (auto _ : state) benchmark::DoNotOptimize(tune_au_thresholds(probs, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TuneThresholds)->Arg(100000);

static void BM_TrainEpoch(benchmark::State& state) {
  SyntheticSpec spec;
  spec.seed = 6;
  spec.num_tracks = 20;
  spec.task_mix = TaskMix::only(Task::Expression);
  const auto data = generate_synthetic(spec);
  TrainConfig cfg;
  cfg.task = Task::Expression;
  cfg.max_epochs = 1;
  cfg.jobs = static_cast<std::size_t>(state.range(0));
  const auto arch = HeadArchitecture::for_task(Task::Expression, FeatureKind::EmbeddingsOnly, 32, 128);
  for (auto _ : state) benchmark::DoNotOptimize(train(data.train, data.validation, arch, cfg));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_TrainEpoch)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
