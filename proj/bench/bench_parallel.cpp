// Serial reference loops against the OpenMP kernels.
//
//   dfal_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <random>

#include "dfal/attacks.hpp"
#include "dfal/data.hpp"
#include "dfal/strategies.hpp"

namespace {

using dfal::Execution;

struct Fixture {
  dfal::Dataset data = dfal::gen_blobs({4, 250, 2, 2.0, 0.5, 1});
  dfal::Network net{dfal::make_arch(dfal::Arch::B, {2}, 4, 2)};
  dfal::CandidatePool pool;
  Fixture() {
    for (std::size_t i = 0; i < 200; ++i) pool.push_back({i * 5, data.inputs[i * 5]});
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

Execution mode(const benchmark::State& state) {
  return state.range(0) ? Execution::parallel : Execution::serial;
}

void BM_BatchDeepFool(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<std::reference_wrapper<const dfal::Tensor>> xs;
  for (const auto& c : f.pool) xs.push_back(c.input);
  for (auto _ : state)
    benchmark::DoNotOptimize(dfal::batch_deepfool(f.net, xs, dfal::AttackConfig{}, mode(state)));
}

void BM_Accuracy(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(dfal::accuracy(f.net, f.data, mode(state)));
}

void BM_GreedyKCenter(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> centers(1000, std::vector<double>(64)),
      points(200, std::vector<double>(64));
  for (auto& c : centers)
    for (double& v : c) v = g(rng);
  for (auto& p : points)
    for (double& v : p) v = g(rng);
  std::vector<std::size_t> keys(points.size());
  for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = i;
  for (auto _ : state)
    benchmark::DoNotOptimize(dfal::greedy_k_center(centers, points, keys, 10, mode(state)));
}

void BM_EglScores(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(dfal::egl_scores(f.net, f.pool, mode(state)));
}

}  // namespace

BENCHMARK(BM_BatchDeepFool)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Accuracy)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GreedyKCenter)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EglScores)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
