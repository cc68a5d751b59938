#include <benchmark/benchmark.h>

#include "vhd/model.hpp"
#include "vhd/pipeline.hpp"

using namespace vhd;

namespace {

TrainConfig paper_scale_config() {
  TrainConfig cfg;  // defaults: d=128, window 150, widths 64
  cfg.seed = 1;
  return cfg;
}

void BM_BranchForwardBackward(benchmark::State& state) {
  TrainConfig cfg = paper_scale_config();
  auto model = ModelState<float>::init(cfg);
  auto input = Tensor<float>::uniform({cfg.window, cfg.d_v}, -1.0f, 1.0f, 2);
  auto registry = model.registry();
  for (auto _ : state) {
    for (auto& [name, tensor] : registry) tensor.zero_grad();
    Graph<float> g;
    auto out = branch_forward(input, input, *model.visual, cfg);
    auto loss = add(out.recon_loss, out.activation_loss);
    g.backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_BranchForwardBackward)->Unit(benchmark::kMillisecond);

void BM_InferWindow(benchmark::State& state) {
  TrainConfig cfg = paper_scale_config();
  auto model = ModelState<float>::init(cfg);
  std::vector<float> window(static_cast<std::size_t>(cfg.window * cfg.d_v));
  auto noise = Tensor<float>::uniform({cfg.window, cfg.d_v}, -1.0f, 1.0f, 3);
  std::copy(noise.data().begin(), noise.data().end(), window.begin());
  for (auto _ : state) {
    auto scores = score_window(window, cfg.window, *model.visual, cfg);
    benchmark::DoNotOptimize(scores.data());
  }
}
BENCHMARK(BM_InferWindow)->Unit(benchmark::kMillisecond);

}  // namespace
