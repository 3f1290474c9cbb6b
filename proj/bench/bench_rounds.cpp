// Round-loop throughput: serial reference vs the OpenMP harness.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "fedams/harness.hpp"
#include "fedams/reference.hpp"

namespace {

fedams::ExperimentConfig bench_config(bool compressed) {
  fedams::ExperimentConfig c;
  c.objective.dim = 128;
  c.objective.num_clients = 64;
  c.objective.heterogeneity = 1.0;
  c.objective.noise = 0.1;
  c.objective.samples_per_client = 200;
  c.local = {10, 0.01, 16};
  c.participation = {64, 32};
  c.rounds = 20;
  c.eval_every = c.rounds;  // the reference does no per-round evaluation
  c.set_master_seed(1);
  if (compressed) {
    c.compressor = {fedams::CompressorKind::topk, 1.0 / 16};
    c.error_feedback = true;
  }
  return c;
}

void BM_Reference(benchmark::State& state) {
  const auto cfg = bench_config(state.range(0) != 0);
  const auto obj = fedams::make_objective(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(fedams::reference::trajectory(cfg, obj));
  state.SetItemsProcessed(state.iterations() * cfg.rounds);
}

void BM_Harness(benchmark::State& state) {
  const auto cfg = bench_config(state.range(0) != 0);
  const auto obj = fedams::make_objective(cfg);
  fedams::RunOptions opts;
  opts.exec.threads = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(fedams::run(cfg, obj, opts));
  state.SetItemsProcessed(state.iterations() * cfg.rounds);
}

void harness_args(benchmark::internal::Benchmark* b) {
  const int max_threads = omp_get_max_threads();
  for (int compressed : {0, 1}) {
    b->Args({compressed, 1});
    if (max_threads > 1) b->Args({compressed, max_threads});
  }
  b->ArgNames({"compressed", "threads"});
}

}  // namespace

BENCHMARK(BM_Reference)->Arg(0)->Arg(1)->ArgName("compressed")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Harness)->Apply(harness_args)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
