#include <benchmark/benchmark.h>

#include <random>

#include "imil/augment.hpp"
#include "imil/rng.hpp"

namespace {

imil::Image noise(int channels, int size, imil::Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  imil::Image img(channels, size, size);
  for (auto& v : img.data) v = u(rng);
  return img;
}

void BM_MixUp(benchmark::State& state) {
  auto rng = imil::make_rng(1);
  const int size = static_cast<int>(state.range(0));
  auto a = noise(3, size, rng);
  auto b = noise(3, size, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(imil::mixup(a, imil::one_hot(0), b, imil::one_hot(1), 0.3));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(a.size() * sizeof(double)));
}
BENCHMARK(BM_MixUp)->Arg(28)->Arg(224);

void BM_CutMix(benchmark::State& state) {
  auto rng = imil::make_rng(2);
  const int size = static_cast<int>(state.range(0));
  auto a = noise(3, size, rng);
  auto b = noise(3, size, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(imil::cutmix(a, imil::one_hot(0), b, imil::one_hot(1), 0.6, rng));
  }
}
BENCHMARK(BM_CutMix)->Arg(28)->Arg(224);

void BM_CutOut(benchmark::State& state) {
  auto rng = imil::make_rng(3);
  const int size = static_cast<int>(state.range(0));
  auto a = noise(3, size, rng);
  for (auto _ : state) benchmark::DoNotOptimize(imil::cutout(a, size / 4, size / 4, rng));
}
BENCHMARK(BM_CutOut)->Arg(28)->Arg(224);

void BM_Blackout(benchmark::State& state) {
  auto rng = imil::make_rng(4);
  const int n = static_cast<int>(state.range(0));
  auto a = noise(3, 224, rng);
  imil::GridSelection sel({n, n, 224, 224}, {0, n + 1});
  for (auto _ : state) benchmark::DoNotOptimize(imil::blackout(a, sel));
}
BENCHMARK(BM_Blackout)->Arg(2)->Arg(4)->Arg(8);

}  // namespace
