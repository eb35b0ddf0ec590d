#include <benchmark/benchmark.h>

#include "gsaug/denoiser.hpp"
#include "gsaug/properties.hpp"

namespace {

using namespace gsaug;

Graph random_graph(NodeId n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<NodePair> e;
  for (const auto& pr : all_pairs(n)) {
    if (rng.bernoulli(p)) e.push_back(pr);
  }
  return Graph(n, e);
}

DenoiserConfig config(int d) {
  DenoiserConfig c;
  c.d = d;
  c.layers = 4;
  c.heads = 4;
  c.dropout = 0.0;
  return c;
}

void BM_ComputeProperties(benchmark::State& state) {
  const Graph g = random_graph(static_cast<NodeId>(state.range(0)), 8.0 / static_cast<double>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(compute_properties(g));
}
BENCHMARK(BM_ComputeProperties)->Arg(64)->Arg(512)->Arg(4096);

void BM_ForwardMarginalSample(benchmark::State& state) {
  const auto n = static_cast<NodeId>(state.range(0));
  const Graph g = random_graph(n, 8.0 / n, 2);
  const auto sched = build_schedule(kDefaultTimesteps, "cosine", 0.0);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(forward_marginal_sample(g, 64, sched, rng));
}
BENCHMARK(BM_ForwardMarginalSample)->Arg(32)->Arg(256);

void BM_Encode(benchmark::State& state) {
  const auto n = static_cast<NodeId>(state.range(0));
  const Denoiser model(config(static_cast<int>(state.range(1))), kDefaultTimesteps, 4);
  const Graph g = random_graph(n, 6.0 / n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(model.encode({g, 10, {}}));
}
BENCHMARK(BM_Encode)->Args({32, 64})->Args({128, 64})->Args({128, 128});

// One reverse step: encode, score the candidate pairs, mix with the posterior.
void BM_ReverseStep(benchmark::State& state) {
  const auto n = static_cast<NodeId>(state.range(0));
  const Denoiser model(config(64), kDefaultTimesteps, 6);
  const auto sched = build_schedule(kDefaultTimesteps, "cosine", 0.0);
  const DiffusionState s{random_graph(n, 6.0 / n, 7), 40, {}};
  Rng rng(8);
  for (auto _ : state) {
    const auto pairs = sampling_pairs(s.a_t, {}, rng);
    const auto p_hat = model.predict_edges(model.encode(s), pairs, s.a_t);
    benchmark::DoNotOptimize(reverse_step_distribution(s, p_hat, pairs, sched));
  }
}
BENCHMARK(BM_ReverseStep)->Arg(32)->Arg(128);

void BM_PretrainEpoch(benchmark::State& state) {
  GraphCorpus corpus;
  for (std::uint64_t i = 0; i < 32; ++i) {
    corpus.graphs.push_back(random_graph(16, 0.25, 100 + i));
    corpus.manifest.push_back({"bench", "synthetic"});
  }
  const auto sched = build_schedule(kDefaultTimesteps, "cosine", 0.0);
  PretrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 32;
  for (auto _ : state) benchmark::DoNotOptimize(pretrain(corpus, config(32), sched, opt));
}
BENCHMARK(BM_PretrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
