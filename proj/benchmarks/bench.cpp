#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "curvetransfer/seqnet.hpp"
#include "curvetransfer/similarity.hpp"
#include "curvetransfer/synthgen.hpp"
#include "curvetransfer/transfer.hpp"

namespace ct = curvetransfer;
namespace sn = curvetransfer::seqnet;

namespace {

std::vector<double> random_sequence(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

ct::Matrix random_window(std::size_t rows, std::size_t cols, unsigned seed) {
  const auto v = random_sequence(rows * cols, seed);
  ct::Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = v[r * cols + c];
  return m;
}

void BM_DtwCost(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_sequence(n, 1), b = random_sequence(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ct::dtw_cost(a, b));
}
BENCHMARK(BM_DtwCost)->Arg(60)->Arg(120)->Arg(240);

void BM_DtwWithPath(benchmark::State& state) {
  const auto a = random_sequence(120, 1), b = random_sequence(120, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ct::dtw_distance(a, b));
}
BENCHMARK(BM_DtwWithPath);

void BM_RankSources(benchmark::State& state) {
  const auto suite = ct::synth::standard_suite(42);
  const auto& target = suite.targets.front();
  const auto ids = ct::select_extreme_training_samples(target);
  const auto train = target.select(std::vector<std::string>(ids.begin(), ids.end()));
  for (auto _ : state) benchmark::DoNotOptimize(ct::rank_sources(suite.sources, train));
}
BENCHMARK(BM_RankSources)->Unit(benchmark::kMillisecond);

void BM_LstmForward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto params = sn::init_params(7, 4, hidden);
  const auto window = random_window(5, 4, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sn::predict(params, window));
}
BENCHMARK(BM_LstmForward)->Arg(8)->Arg(32);

void BM_LstmForwardBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const auto params = sn::init_params(7, 4, hidden);
  const auto window = random_window(5, 4, 3);
  for (auto _ : state) {
    const auto fwd = sn::forward_sequence(params, window);
    benchmark::DoNotOptimize(sn::backward(params, fwd, window, 0.5));
  }
}
BENCHMARK(BM_LstmForwardBackward)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
