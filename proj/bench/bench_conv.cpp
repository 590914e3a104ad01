#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gianet/kernels.hpp"
#include "gianet/parallel.hpp"

namespace {

using gianet::kernels::ConvGeometry;

struct Problem {
  ConvGeometry g;
  std::vector<float> input;
  std::vector<float> weight;
  std::vector<float> bias;
  std::vector<float> output;
};

// Square 3x3 "same" convolution with channels c -> c over an s x s plane.
Problem make_problem(int64_t channels, int64_t side) {
  Problem p;
  p.g = ConvGeometry::make(gianet::Shape{1, channels, side, side}, channels, 3, 3, 1, 1, 1, 1, 1);
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-1.0F, 1.0F);
  p.input.resize(static_cast<std::size_t>(channels * side * side));
  p.weight.resize(static_cast<std::size_t>(channels * channels * 9));
  p.bias.resize(static_cast<std::size_t>(channels));
  for (auto* v : {&p.input, &p.weight, &p.bias})
    for (auto& x : *v) x = u(rng);
  p.output.resize(static_cast<std::size_t>(channels * p.g.out_plane()));
  return p;
}

void set_counters(benchmark::State& state, const Problem& p) {
  const double flops = 2.0 * static_cast<double>(p.g.patch_size() * p.g.out_ch * p.g.out_plane());
  state.counters["FLOP/s"] = benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvReference(benchmark::State& state) {
  Problem p = make_problem(state.range(0), state.range(1));
  for (auto _ : state) {
    gianet::kernels::reference::conv2d_forward(p.g, p.input.data(), p.weight.data(), p.bias.data(), p.output.data());
    benchmark::DoNotOptimize(p.output.data());
  }
  set_counters(state, p);
}

void BM_ConvBlocked(benchmark::State& state) {
  gianet::parallel::set_workers(static_cast<int>(state.range(2)));
  Problem p = make_problem(state.range(0), state.range(1));
  for (auto _ : state) {
    gianet::kernels::conv2d_forward(p.g, p.input.data(), p.weight.data(), p.bias.data(), p.output.data());
    benchmark::DoNotOptimize(p.output.data());
  }
  set_counters(state, p);
}

void BM_ConvBlockedBackward(benchmark::State& state) {
  gianet::parallel::set_workers(1);
  Problem p = make_problem(state.range(0), state.range(1));
  std::vector<float> gi(p.input.size());
  std::vector<float> gw(p.weight.size());
  std::vector<float> gb(p.bias.size());
  for (auto _ : state) {
    gianet::kernels::conv2d_backward_input(p.g, p.output.data(), p.weight.data(), gi.data());
    gianet::kernels::conv2d_backward_weight(p.g, p.input.data(), p.output.data(), gw.data(), gb.data());
    benchmark::DoNotOptimize(gi.data());
    benchmark::DoNotOptimize(gw.data());
  }
  set_counters(state, p);
}

}  // namespace

BENCHMARK(BM_ConvReference)->Args({8, 64})->Args({32, 64})->Args({64, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBlocked)
    ->Args({8, 64, 1})
    ->Args({32, 64, 1})
    ->Args({64, 32, 1})
    ->Args({32, 128, 1})
    ->Args({32, 128, 4})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBlockedBackward)->Args({32, 64})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
