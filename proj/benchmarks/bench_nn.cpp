#include <benchmark/benchmark.h>

#include "ragtts/model.hpp"
#include "ragtts/nn.hpp"
#include "ragtts/rng.hpp"

using namespace ragtts;

namespace {

Tensor random_tensor(Rng& rng, std::vector<size_t> shape) {
  Tensor t(std::move(shape));
  for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_linear_forward(benchmark::State& state) {
  const size_t n = state.range(0);
  Rng rng(1);
  Tensor x = random_tensor(rng, {n, 32});
  Tensor w = random_tensor(rng, {32, 32});
  Tensor b = random_tensor(rng, {32});
  for (auto _ : state) {
    benchmark::DoNotOptimize(linear(x, w, b));
  }
}
BENCHMARK(BM_linear_forward)->Arg(8)->Arg(48);

void BM_cross_attention_forward(benchmark::State& state) {
  const size_t nk = state.range(0);
  Rng rng(2);
  Tensor e_cur = random_tensor(rng, {8, 32});
  Tensor e_con = random_tensor(rng, {nk, 32});
  Tensor wq = random_tensor(rng, {32, 32});
  Tensor wk = random_tensor(rng, {32, 32});
  Tensor wv = random_tensor(rng, {32, 32});
  for (auto _ : state) {
    benchmark::DoNotOptimize(cross_attention(e_cur, e_con, wq, wk, wv));
  }
}
BENCHMARK(BM_cross_attention_forward)->Arg(16)->Arg(64);

void BM_encode_text(benchmark::State& state) {
  CaClapConfig cfg;
  Checkpoint ckpt = init_checkpoint(cfg);
  Rng rng(3);
  std::vector<int> cur(9), con(49);
  for (int& t : cur) t = static_cast<int>(rng.below(cfg.vocab_size));
  for (int& t : con) t = static_cast<int>(rng.below(cfg.vocab_size));
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_text(ckpt, cur, con));
  }
}
BENCHMARK(BM_encode_text);

}  // namespace
