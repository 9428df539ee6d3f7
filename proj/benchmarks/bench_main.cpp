#include <benchmark/benchmark.h>

#include <random>

#include "drbl/diagnostics.hpp"
#include "drbl/encoder.hpp"
#include "drbl/ops.hpp"

using namespace drbl;

namespace {

Tensor<float> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(rows * cols);
  for (auto& x : v) x = u(rng);
  return Tensor<float>::from({rows, cols}, v);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(matmul(tape, a, b));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(300);

void BM_BiLstm(benchmark::State& state) {
  const auto steps = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(2);
  const auto params = LstmParams<float>::init(d, d, rng);
  const auto x = random_matrix(steps, d, rng);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(bilstm(tape, x, RnnState<float>::zero(d), params).hiddens);
  }
}
BENCHMARK(BM_BiLstm)->Args({14, 50})->Args({14, 150})->Args({30, 150});

void BM_ForwardBackward(benchmark::State& state) {
  ModelConfig c;
  c.embedding_dim = static_cast<std::size_t>(state.range(0));
  c.hidden_dim = static_cast<std::size_t>(state.range(1));
  const std::size_t vocab = 2000;
  const auto params = ModelParams<float>::init(c, vocab);
  std::mt19937_64 rng(3);
  const auto pair = random_pair(vocab, 16, rng);
  for (auto _ : state) {
    Tape<float> tape;
    const auto out = forward(tape, params, pair, true, &rng);
    tape.backward(loss(tape, out.probs, Label::neutral));
  }
}
BENCHMARK(BM_ForwardBackward)->Args({50, 50})->Args({300, 100})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
