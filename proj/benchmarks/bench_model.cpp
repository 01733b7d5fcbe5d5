#include <benchmark/benchmark.h>

#include <random>

#include "imil/model.hpp"
#include "imil/rng.hpp"
#include "imil/saliency.hpp"

namespace {

std::vector<imil::Image> batch(int n, int size, imil::Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<imil::Image> out;
  for (int i = 0; i < n; ++i) {
    imil::Image img(1, size, size);
    for (auto& v : img.data) v = u(rng);
    out.push_back(std::move(img));
  }
  return out;
}

void BM_CnnTrainStep(benchmark::State& state) {
  auto rng = imil::make_rng(5);
  const int size = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  imil::ReferenceCnn cnn(1, size, 1);
  auto images = batch(n, size, rng);
  std::vector<imil::LabelVec> targets(n, imil::LabelVec{1.0, 0.0});
  for (auto _ : state) benchmark::DoNotOptimize(cnn.train_step(images, targets, 1e-4));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_CnnTrainStep)->Args({28, 16})->Args({28, 64})->Args({64, 16})->Unit(benchmark::kMillisecond);

void BM_CnnForward(benchmark::State& state) {
  auto rng = imil::make_rng(6);
  const int size = static_cast<int>(state.range(0));
  imil::ReferenceCnn cnn(1, size, 1);
  auto images = batch(64, size, rng);
  for (auto _ : state) benchmark::DoNotOptimize(cnn.forward(images));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_CnnForward)->Arg(28)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GradCam(benchmark::State& state) {
  auto rng = imil::make_rng(7);
  const int size = static_cast<int>(state.range(0));
  imil::ReferenceCnn cnn(1, size, 1);
  auto images = batch(1, size, rng);
  for (auto _ : state) benchmark::DoNotOptimize(imil::grad_cam(cnn, images[0], 1));
}
BENCHMARK(BM_GradCam)->Arg(28)->Arg(224);

}  // namespace
