#include <benchmark/benchmark.h>

#include <random>

#include "imil/metrics.hpp"
#include "imil/rng.hpp"
#include "imil/session.hpp"

namespace {

std::vector<imil::PredictionRecord> records(int n) {
  auto rng = imil::make_rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<imil::PredictionRecord> out;
  for (int i = 0; i < n; ++i) {
    const double p = u(rng);
    out.push_back(imil::make_prediction("s" + std::to_string(i), coin(rng) ? 1 : 0, {1 - p, p}));
  }
  return out;
}

void BM_Evaluate(benchmark::State& state) {
  const auto rs = records(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(imil::evaluate(rs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(200)->Arg(10000);

void BM_Auroc(benchmark::State& state) {
  const auto rs = records(static_cast<int>(state.range(0)));
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& r : rs) {
    scores.push_back(r.probabilities[1]);
    labels.push_back(r.true_label);
  }
  for (auto _ : state) benchmark::DoNotOptimize(imil::auroc(scores, labels));
}
BENCHMARK(BM_Auroc)->Arg(200)->Arg(10000);

void BM_SelectOutliers(benchmark::State& state) {
  const auto rs = records(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(imil::select_outliers(rs, 20));
}
BENCHMARK(BM_SelectOutliers)->Arg(400)->Arg(10000);

}  // namespace
