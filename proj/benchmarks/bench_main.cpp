#include <benchmark/benchmark.h>

#include <random>

#include "fixtures.hpp"
#include "ptmf/dsp.hpp"
#include "ptmf/encoders.hpp"
#include "ptmf/model.hpp"
#include "ptmf/train.hpp"

using namespace ptmf;

namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = fixture::random_tensor({n, n}, rng), b = fixture::random_tensor({n, n}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_LstmForwardBackward(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  ParamStore store;
  Rng rng(2);
  nn::Lstm lstm(store, "l", 32, 16, rng);
  const Tensor x = fixture::random_tensor({t, 32}, rng);
  for (auto _ : state) {
    store.zero_grad();
    sum(lstm.encode(x)).backward();
  }
}
BENCHMARK(BM_LstmForwardBackward)->Arg(16)->Arg(64);

void BM_Mfcc(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  dsp::Waveform w;
  w.samples.resize(16000);
  for (double& s : w.samples) s = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::mfcc(w, {}, {}));
}
BENCHMARK(BM_Mfcc)->Unit(benchmark::kMillisecond);

// One Adam step on a batch of 8 random subjects at the default model size.
void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  DepressionNet net(cfg);
  Rng rng(4);
  std::vector<SampleTensors> batch(8);
  for (auto& s : batch) {
    s.lld = fixture::random_tensor({12, cfg.dims.lld}, rng);
    s.mfcc = fixture::random_tensor({12, cfg.dims.mfcc}, rng);
    s.wav2vec = fixture::random_tensor({12, cfg.dims.wav2vec}, rng);
    s.openface = fixture::random_tensor({12, cfg.dims.openface}, rng);
    s.resnet = fixture::random_tensor({12, cfg.dims.resnet}, rng);
    s.densenet = fixture::random_tensor({12, cfg.dims.densenet}, rng);
    s.personality = fixture::random_tensor({1, cfg.personality_dim}, rng);
  }
  const std::vector<int> labels = {0, 1, 0, 1, 0, 1, 0, 1};
  AdamState adam = AdamState::for_params(net.params());
  const AdamOptions opt = AdamOptions::from_config(cfg);
  for (auto _ : state) {
    std::vector<Tensor> rows;
    for (const auto& s : batch) rows.push_back(net.logits(s, true, rng));
    net.params().zero_grad();
    const Tensor loss = cross_entropy(concat(rows, 0), labels);
    loss.backward();
    adam_step(net.params(), adam, opt);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
