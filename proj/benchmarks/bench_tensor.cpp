#include <benchmark/benchmark.h>

#include "vhd/tensor.hpp"

using namespace vhd;

namespace {

void BM_MatmulForward(benchmark::State& state) {
  const auto n = state.range(0);
  auto a = Tensor<float>::uniform({150, n}, -1.0f, 1.0f, 1);
  auto b = Tensor<float>::uniform({n, n}, -1.0f, 1.0f, 2);
  for (auto _ : state) {
    auto c = matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 150 * n * n);
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = state.range(0);
  auto a = Tensor<float>::uniform({150, n}, -1.0f, 1.0f, 1, true);
  auto b = Tensor<float>::uniform({n, n}, -1.0f, 1.0f, 2, true);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    Graph<float> g;
    auto loss = reduce_sum(matmul(a, b));
    g.backward(loss);
    benchmark::DoNotOptimize(a.grad_mut().data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_Conv1dForward(benchmark::State& state) {
  auto x = Tensor<float>::uniform({128, 150}, -1.0f, 1.0f, 3);
  auto k = Tensor<float>::uniform({64, 128, 3}, -0.1f, 0.1f, 4);
  auto b = Tensor<float>::uniform({64}, -0.1f, 0.1f, 5);
  for (auto _ : state) {
    auto y = conv1d(x, k, b, 2, Pad::same);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 64 * 128 * 3 * 75);
}
BENCHMARK(BM_Conv1dForward);

void BM_SoftmaxRows(benchmark::State& state) {
  auto x = Tensor<float>::uniform({150, 150}, -2.0f, 2.0f, 6);
  for (auto _ : state) {
    auto y = softmax(x, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_SoftmaxRows);

}  // namespace
