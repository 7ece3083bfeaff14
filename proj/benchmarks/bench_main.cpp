#include <benchmark/benchmark.h>

#include "lscnn/compose.hpp"
#include "lscnn/model.hpp"

using namespace lscnn;

namespace {

TensorF random_batch(std::size_t n, std::size_t c, std::size_t s,
                     std::uint64_t seed) {
  Rng rng(seed);
  return TensorF::normal({n, c, s, s}, 0.0f, 1.0f, rng);
}

void BM_Conv2Forward(benchmark::State& state) {
  // Second conv stage of the whole-face network: 27x47x47 -> 36x45x45.
  Rng rng(1);
  ConvParams<float> p{TensorF::normal({36, 27, 3, 3}, 0.f, 0.1f, rng),
                      TensorF({36}), 1};
  const TensorF x = random_batch(1, 27, 47, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_forward(x, p));
  }
}
BENCHMARK(BM_Conv2Forward);

void BM_Conv2Backward(benchmark::State& state) {
  Rng rng(1);
  ConvParams<float> p{TensorF::normal({36, 27, 3, 3}, 0.f, 0.1f, rng),
                      TensorF({36}), 1};
  const TensorF x = random_batch(1, 27, 47, 2);
  const TensorF gout = random_batch(1, 36, 45, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_backward(x, p, gout));
  }
}
BENCHMARK(BM_Conv2Backward);

void BM_WholeForward(benchmark::State& state) {
  Model<float> model(lscnn_spec());
  Rng rng(1);
  model.init_params(0.0001f, rng);
  const TensorF batch =
      random_batch(static_cast<std::size_t>(state.range(0)), 3, 96, 4);
  Rng fwd(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(batch, Mode::kInfer, fwd));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WholeForward)->Arg(1)->Arg(16);

void BM_TrainStep(benchmark::State& state) {
  Model<float> model(lscnn_spec());
  Rng rng(1);
  model.init_params(0.0001f, rng);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const TensorF batch = random_batch(n, 3, 96, 4);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  Rng fwd(2);
  for (auto _ : state) {
    ForwardCache<float> cache;
    TensorF logits = model.forward(batch, Mode::kTrain, fwd, &cache);
    SoftmaxResult<float> sm = softmax_xent(logits, labels);
    benchmark::DoNotOptimize(model.backward(cache, sm.grad_logits));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32);

void BM_Compose(benchmark::State& state) {
  const ArchitectureSpec whole = lscnn_spec();
  const ArchitectureSpec part = patchnet_spec();
  std::array<ModelParams<float>, 9> nets;
  for (int k = 0; k < 9; ++k) {
    Model<float> m(part);
    Rng rng(static_cast<std::uint64_t>(k) + 1);
    m.init_params(0.01f, rng);
    nets[static_cast<std::size_t>(k)] = m.params();
  }
  for (auto _ : state) {
    Rng rng(7);
    benchmark::DoNotOptimize(compose(nets, whole, part, 0.01f, rng));
  }
}
BENCHMARK(BM_Compose);

}  // namespace

BENCHMARK_MAIN();
