#include <vector>

#include <benchmark/benchmark.h>

#include "sdeabc/pmcmc.hpp"
#include "sdeabc/sde_model.hpp"
#include "sdeabc/summaries.hpp"

using namespace sdeabc;

namespace {

const ModelParams& truth() {
  static const ModelParams p = ModelParams::simulation_study_truth();
  return p;
}

TimeSeries dataset(std::size_t n) {
  RngStream rng(355);
  return simulate_observed(truth(), TimeGrid::regular(1.0, 70.0, n), -2.45, rng).z;
}

void BM_Tau(benchmark::State& state) {
  const MixtureParams psi = truth().mixture();
  RngStream rng(1);
  std::vector<double> xs(1024);
  for (double& x : xs) x = rng.normal();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tau(psi, xs[i++ & 1023]));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Tau);

void BM_MixtureQuantileTail(benchmark::State& state) {
  const MixtureParams psi = truth().mixture();
  for (auto _ : state) benchmark::DoNotOptimize(mixture_quantile(psi, 1e-9));
}
BENCHMARK(BM_MixtureQuantileTail);

void BM_SimulateObserved(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TimeGrid grid = TimeGrid::regular(1.0, 70.0, n);
  RngStream rng(2);
  std::vector<double> z, scratch;
  for (auto _ : state) {
    simulate_observed_into(truth(), grid.times(), -2.45, rng, z, scratch);
    benchmark::DoNotOptimize(z.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateObserved)->Arg(355)->Arg(829)->Arg(3550);

void BM_Summarize(benchmark::State& state) {
  const TimeSeries data = dataset(static_cast<std::size_t>(state.range(0)));
  const SummarySpec spec = SummarySpec::with_subsampling(
      {2, 5, 10, 15}, 1, {0.15, 0.30, 0.45, 0.60, 0.75, 0.90}, {100, 100, 100, 100, 1, 1, 1, 1, 1, 1});
  for (auto _ : state) benchmark::DoNotOptimize(summarize(data, spec, SummaryRole::kSimulated));
}
BENCHMARK(BM_Summarize)->Arg(355)->Arg(3550);

void BM_BootstrapFilter(benchmark::State& state) {
  const TimeSeries data = dataset(static_cast<std::size_t>(state.range(0)));
  FilterSettings fs;
  fs.particles = static_cast<std::size_t>(state.range(1));
  fs.x0 = -2.45;
  RngStream rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_filter(truth(), data, fs, rng));
}
BENCHMARK(BM_BootstrapFilter)->Args({120, 100})->Args({355, 100})->Unit(benchmark::kMillisecond);

void BM_KalmanLoglik(benchmark::State& state) {
  const ModelParams p = linear_degenerate_params(0.05, 0.5, 0.5);
  RngStream rng(4);
  const TimeSeries data = simulate_observed(p, TimeGrid::regular(0.0, 1.0, 200), 0.0, rng).z;
  for (auto _ : state) benchmark::DoNotOptimize(kalman_loglik(p, data, InitialLaw::kFixed, 0.0));
}
BENCHMARK(BM_KalmanLoglik);

}  // namespace

BENCHMARK_MAIN();
