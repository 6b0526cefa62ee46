#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "banditlab/inference.hpp"
#include "banditlab/metrics.hpp"
#include "banditlab/orchestrator.hpp"
#include "banditlab/rng.hpp"
#include "banditlab/rw_model.hpp"

using namespace banditlab;

namespace {

FitDataset make_dataset(int n_runs, int n_trials) {
  FitDataset data;
  data.structure_label = "asymmetric";
  const RewardStructure structure = preset_structure("asymmetric");
  for (int i = 0; i < n_runs; ++i) {
    data.runs.push_back(simulate_run({0.3, 2.5}, structure, n_trials,
                                     seed_combine(std::uint64_t{12}, std::uint64_t(i))));
  }
  return data;
}

void BM_RngUniform(benchmark::State& state) {
  Xoshiro256pp rng(42);
  double acc = 0.0;
  for (auto _ : state) acc += rng.uniform();
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_RngUniform);

void BM_RngNormal(benchmark::State& state) {
  Xoshiro256pp rng(42);
  double acc = 0.0;
  for (auto _ : state) acc += rng.normal();
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_RngNormal);

void BM_RunLoglik(benchmark::State& state) {
  const FitDataset data = make_dataset(1, static_cast<int>(state.range(0)));
  const RWParams params{0.3, 2.5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_loglik(params, data.runs[0]));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RunLoglik)->Arg(100);

void BM_JointPosteriorGrad(benchmark::State& state) {
  const FitDataset data = make_dataset(static_cast<int>(state.range(0)), 100);
  const std::size_t dim = param_dim(data);
  std::vector<double> theta(dim, 0.1);
  std::vector<double> grad(dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(joint_log_posterior_grad(theta, data, grad));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_JointPosteriorGrad)->Arg(10)->Arg(50);

class StdNormal4D final : public LogDensity {
 public:
  std::size_t dim() const override { return 4; }
  double value_and_grad(std::span<const double> theta, std::span<double> grad) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      v -= 0.5 * theta[i] * theta[i];
      grad[i] = -theta[i];
    }
    return v;
  }
};

void BM_HmcStdNormal(benchmark::State& state) {
  StdNormal4D target;
  SamplerConfig config;
  config.n_chains = 1;
  config.n_warmup = static_cast<int>(state.range(0));
  config.n_samples = static_cast<int>(state.range(0));
  config.master_seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample(target, config));
  }
  state.SetItemsProcessed(state.iterations() * 2 * state.range(0));
}
BENCHMARK(BM_HmcStdNormal)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_RunMetrics(benchmark::State& state) {
  const RewardStructure structure = preset_structure("symmetric");
  const std::uint64_t cond = condition_seed(3, "bench");
  RWAgent agent(RWConfig{0.2, 3.0, false}, seed_combine(run_seed(cond, 0), "agent"));
  BanditEnv env(structure, seed_combine(run_seed(cond, 0), "env"));
  const RunLog log = play_run(agent, env, 100, "bench", 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_metrics(log, structure, 10));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_RunMetrics);

}  // namespace

BENCHMARK_MAIN();
