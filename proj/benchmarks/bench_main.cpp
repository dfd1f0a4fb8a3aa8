#include <benchmark/benchmark.h>

#include <vector>

#include "betadet/assignment.hpp"
#include "betadet/beta.hpp"
#include "betadet/losses.hpp"
#include "betadet/model.hpp"
#include "betadet/rng.hpp"
#include "betadet/special.hpp"
#include "betadet/synthdata.hpp"
#include "betadet/training.hpp"

namespace {

using namespace betadet;

void BM_Lgamma(benchmark::State& state) {
  double x = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(special::lgamma(x));
    x = x < 100.0 ? x + 0.37 : 0.5;
  }
}
BENCHMARK(BM_Lgamma);

void BM_BetaLogPdf(benchmark::State& state) {
  const BetaParams p(3.5, 7.25);
  double y = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_pdf(p, y));
    y = y < 0.98 ? y + 0.013 : 0.01;
  }
}
BENCHMARK(BM_BetaLogPdf);

void BM_BetaCdf(benchmark::State& state) {
  const BetaParams p(static_cast<double>(state.range(0)), 2.5);
  double y = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdf(p, y));
    y = y < 0.98 ? y + 0.013 : 0.01;
  }
}
BENCHMARK(BM_BetaCdf)->Arg(1)->Arg(20)->Arg(100);

void BM_BetaQuantile(benchmark::State& state) {
  const BetaParams p(4.0, 9.0);
  double q = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantile(p, q));
    q = q < 0.98 ? q + 0.013 : 0.01;
  }
}
BENCHMARK(BM_BetaQuantile);

void BM_Hungarian(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = rows / 2;
  Rng rng(1);
  CostMatrix c(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < cols; ++k) c(r, k) = rng.uniform(0, 10);
  }
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(c));
}
BENCHMARK(BM_Hungarian)->Arg(12)->Arg(64)->Arg(256);

void BM_ForwardBatch8(benchmark::State& state) {
  const auto scenes = generate(1, 8);
  std::vector<const Image*> batch;
  for (const auto& s : scenes) batch.push_back(&s.image);
  const Detector model(ModelConfig{}, 1);
  for (auto _ : state) {
    const ag::NoGradGuard guard;
    benchmark::DoNotOptimize(model.forward(batch));
  }
}
BENCHMARK(BM_ForwardBatch8)->Unit(benchmark::kMillisecond);

void BM_TrainStepBatch8(benchmark::State& state) {
  const auto scenes = generate(1, 8);
  std::vector<const Scene*> batch;
  for (const auto& s : scenes) batch.push_back(&s);
  RunConfig config;
  Detector model(config.model, 1);
  ag::AdamState opt;
  std::size_t step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(model, opt, batch, config, ++step));
}
BENCHMARK(BM_TrainStepBatch8)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
