// Acceptance harness. Each criterion prints one PASS/FAIL line with the
// observed values; the process exits non-zero if any requested criterion
// fails. With no argument all criteria run; with an integer argument only
// that criterion runs. ACCEPT_FULL=1 switches criterion 7 to its full-size
// variant.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "banditlab/orchestrator.hpp"
#include "banditlab/rng.hpp"
#include "banditlab/stats.hpp"

using namespace banditlab;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

struct Criterion {
  bool ok = true;
  std::string detail;

  void require(bool condition, const std::string& label) {
    if (!detail.empty()) detail += ", ";
    detail += label;
    if (!condition) {
      detail += " [FAILED]";
      ok = false;
    }
  }
};

// Plays one synthetic condition with the orchestrator's seeding chain and
// aggregates it, mirroring run_plan without touching the filesystem.
ConditionSummary simulate_condition(
    const std::function<std::unique_ptr<Agent>(std::uint64_t)>& make_agent,
    const RewardStructure& structure, const std::string& condition_id, int n_runs,
    int n_trials, int warmup, std::uint64_t master_seed) {
  const std::uint64_t cond_seed = condition_seed(master_seed, condition_id);
  std::vector<RunMetrics> metrics;
  metrics.reserve(static_cast<std::size_t>(n_runs));
  for (int run_id = 0; run_id < n_runs; ++run_id) {
    const std::uint64_t rseed = run_seed(cond_seed, run_id);
    BanditEnv env(structure, seed_combine(rseed, "env"));
    auto agent = make_agent(seed_combine(rseed, "agent"));
    const RunLog log = play_run(*agent, env, n_trials, condition_id, run_id);
    metrics.push_back(run_metrics(log, structure, warmup));
  }
  return condition_summary(metrics, warmup);
}

double metric_mean(const ConditionSummary& summary, const std::string& name) {
  const MetricSummary* m = summary.find(name);
  return m ? m->mean : std::numeric_limits<double>::quiet_NaN();
}

// --------------------------------------------------------------------------
// 1. Oracle benchmark.
// --------------------------------------------------------------------------
Criterion criterion1() {
  Criterion c;
  const auto start = std::chrono::steady_clock::now();
  const RewardStructure structure = preset_structure("asymmetric");
  const ConditionSummary summary = simulate_condition(
      [&](std::uint64_t) { return std::make_unique<OracleAgent>(structure); }, structure,
      "accept-oracle-asymmetric", 200, 100, 10, 42);
  const double total = metric_mean(summary, "total_reward");
  const double target = metric_mean(summary, "target_rate");
  const double elapsed = seconds_since(start);
  c.require(total >= 74.0 && total <= 76.0, "mean total reward " + fmt(total) + " in [74,76]");
  c.require(target == 1.0, "target rate " + fmt(target) + " == 1");
  c.require(elapsed < 5.0, "runtime " + fmt(elapsed) + "s < 5s");
  return c;
}

// --------------------------------------------------------------------------
// 2. Chance benchmark.
// --------------------------------------------------------------------------
Criterion criterion2() {
  Criterion c;
  const auto start = std::chrono::steady_clock::now();
  const RewardStructure structure = preset_structure("symmetric");
  const ConditionSummary summary = simulate_condition(
      [&](std::uint64_t seed) { return std::make_unique<RandomAgent>(seed); }, structure,
      "accept-random-symmetric", 200, 100, 10, 42);
  const double total = metric_mean(summary, "total_reward");
  const double target = metric_mean(summary, "target_rate");
  const double bias = metric_mean(summary, "choice_bias");
  const double elapsed = seconds_since(start);
  c.require(total >= 24.0 && total <= 26.0, "mean total reward " + fmt(total) + " in [24,26]");
  c.require(target >= 0.48 && target <= 0.52, "target rate " + fmt(target) + " in [0.48,0.52]");
  c.require(bias >= -0.02 && bias <= 0.02, "choice bias " + fmt(bias) + " in [-0.02,0.02]");
  c.require(elapsed < 5.0, "runtime " + fmt(elapsed) + "s < 5s");
  return c;
}

// --------------------------------------------------------------------------
// 3. Rigidity band for a sharp, X-primed learner on the symmetric structure.
// --------------------------------------------------------------------------
Criterion criterion3() {
  Criterion c;
  const RewardStructure structure = preset_structure("symmetric");
  const ConditionSummary summary = simulate_condition(
      [&](std::uint64_t seed) {
        return std::make_unique<RWAgent>(RWConfig{0.15, 4.9, true}, seed);
      },
      structure, "accept-rw-primed-symmetric", 200, 100, 10, 42);
  c.require(summary.stubbornness_rate >= 0.8,
            "stubbornness rate " + fmt(summary.stubbornness_rate) + " >= 0.8");
  c.require(summary.rigidity_index >= 0.9,
            "rigidity index " + fmt(summary.rigidity_index) + " >= 0.9");
  return c;
}

// --------------------------------------------------------------------------
// 4. Metric oracles on handcrafted sequences.
// --------------------------------------------------------------------------
Criterion criterion4() {
  Criterion c;
  const RewardStructure sym = preset_structure("symmetric");

  RunLog fourTrials;
  fourTrials.condition_id = "hand";
  fourTrials.trials = {{1, Choice::X, 0, ""},
                       {2, Choice::X, 0, ""},
                       {3, Choice::Y, 0, ""},
                       {4, Choice::Y, 1, ""}};
  const RunMetrics m4 = run_metrics(fourTrials, sym, 1);
  c.require(m4.loss_shift.has_value() && *m4.loss_shift == 1.0 / 3.0,
            "loss shift == 1/3 exactly");
  c.require(!m4.win_shift.has_value(), "win shift undefined (no win antecedents)");
  c.require(m4.total_reward == 1 && m4.c_bar.has_value() && *m4.c_bar == 0.5,
            "totals and c-bar on the 4-trial sequence");

  RunLog biased;
  biased.condition_id = "hand";
  for (int t = 1; t <= 100; ++t) {
    biased.trials.push_back({t, t <= 39 ? Choice::Y : Choice::X, 0, ""});
  }
  const RunMetrics mb = run_metrics(biased, sym, 10);
  const bool exact = mb.choice_bias.has_value() && *mb.choice_bias == 39.0 / 100.0 - 0.5 &&
                     std::abs(*mb.choice_bias - (-0.11)) <= 1e-12;
  c.require(exact, "choice bias == -0.11 at c-bar 0.39");
  return c;
}

// --------------------------------------------------------------------------
// 5. Analytic gradient versus central finite differences.
// --------------------------------------------------------------------------
Criterion criterion5() {
  Criterion c;
  const auto start = std::chrono::steady_clock::now();

  CohortSpec spec;
  spec.hyper = {0.0, 0.2, 0.3, 0.15};
  spec.n_runs = 5;
  spec.n_trials = 30;
  spec.structure = preset_structure("asymmetric");
  spec.condition_id = "grad-check";
  const auto cohort = simulate_cohort(spec, 99);
  FitDataset data;
  data.structure_label = spec.structure.label;
  for (const CohortRun& run : cohort) {
    FitRun fit_run;
    for (const TrialRecord& t : run.log.trials) {
      fit_run.choices.push_back(t.choice == Choice::Y ? 1 : 0);
      fit_run.rewards.push_back(static_cast<std::uint8_t>(t.reward));
      fit_run.valid.push_back(1);
    }
    data.runs.push_back(std::move(fit_run));
  }

  const std::size_t dim = param_dim(data);
  Xoshiro256pp rng(1234);
  const double h = 1e-5;
  double worst = 0.0;
  for (int point = 0; point < 100; ++point) {
    std::vector<double> theta(dim);
    for (double& v : theta) v = 0.5 * rng.normal();
    std::vector<double> grad(dim);
    joint_log_posterior_grad(theta, data, grad);
    for (std::size_t i = 0; i < dim; ++i) {
      std::vector<double> lo = theta, hi = theta;
      lo[i] -= h;
      hi[i] += h;
      const double fd =
          (joint_log_posterior(hi, data) - joint_log_posterior(lo, data)) / (2.0 * h);
      const double rel =
          std::abs(grad[i] - fd) / std::max({1.0, std::abs(grad[i]), std::abs(fd)});
      worst = std::max(worst, rel);
    }
  }
  const double elapsed = seconds_since(start);
  c.require(worst <= 1e-5,
            "max relative error " + fmt(worst) + " <= 1e-5 over 100 points x " +
                std::to_string(dim) + " coords");
  c.require(elapsed < 10.0, "runtime " + fmt(elapsed) + "s < 10s");
  return c;
}

// --------------------------------------------------------------------------
// 6. Sampler sanity on a standard 2-D normal.
// --------------------------------------------------------------------------
class StdNormal2D final : public LogDensity {
 public:
  std::size_t dim() const override { return 2; }
  double value_and_grad(std::span<const double> theta, std::span<double> grad) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      v -= 0.5 * theta[i] * theta[i];
      grad[i] = -theta[i];
    }
    return v;
  }
};

Criterion criterion6() {
  Criterion c;
  const auto start = std::chrono::steady_clock::now();
  StdNormal2D target;
  SamplerConfig config;
  config.n_chains = 4;
  config.n_warmup = 1000;
  config.n_samples = 1000;
  config.master_seed = 2024;
  const Chains chains = sample(target, config);
  const auto rows = summarize(chains);
  for (const ParameterSummary& row : rows) {
    c.require(std::abs(row.mean) <= 0.05, row.name + " mean " + fmt(row.mean) + " in [-0.05,0.05]");
    c.require(std::abs(row.sd - 1.0) <= 0.05, row.name + " sd " + fmt(row.sd) + " in [0.95,1.05]");
    c.require(row.rhat <= 1.01, row.name + " rhat " + fmt(row.rhat) + " <= 1.01");
  }
  const double elapsed = seconds_since(start);
  c.require(elapsed < 30.0, "runtime " + fmt(elapsed) + "s < 30s");
  return c;
}

// --------------------------------------------------------------------------
// 7. Parameter recovery at group A = 0.2, tau = 3.0.
// --------------------------------------------------------------------------
Criterion criterion7() {
  Criterion c;
  const bool full = []() {
    const char* v = std::getenv("ACCEPT_FULL");
    return v && std::strcmp(v, "1") == 0;
  }();
  const auto start = std::chrono::steady_clock::now();

  CohortSpec spec;
  spec.hyper.mu_a = normal_quantile(0.2);
  spec.hyper.sigma_a = 0.1;
  spec.hyper.mu_tau = normal_quantile(3.0 / 5.0);
  spec.hyper.sigma_tau = 0.1;
  spec.n_runs = full ? 200 : 50;
  spec.n_trials = 100;
  spec.structure = preset_structure("asymmetric");
  spec.condition_id = "recovery";
  const auto cohort = simulate_cohort(spec, 20240901);

  FitDataset data;
  data.structure_label = spec.structure.label;
  for (const CohortRun& run : cohort) {
    FitRun fit_run;
    for (const TrialRecord& t : run.log.trials) {
      fit_run.choices.push_back(t.choice == Choice::Y ? 1 : 0);
      fit_run.rewards.push_back(static_cast<std::uint8_t>(t.reward));
      fit_run.valid.push_back(1);
    }
    data.runs.push_back(std::move(fit_run));
  }

  SamplerConfig config;
  config.n_chains = 4;
  config.n_warmup = 1000;
  config.n_samples = 1000;
  config.master_seed = 42;
  const FitResult fit = fit_dataset(data, config);

  double fit_a = 0.0, fit_tau = 0.0;
  for (const ParameterSummary& s : fit.natural_group) {
    if (s.name == "A_group") fit_a = s.mean;
    if (s.name == "tau_group") fit_tau = s.mean;
  }
  double worst_rhat = 0.0;
  for (const ParameterSummary& s : fit.unconstrained) worst_rhat = std::max(worst_rhat, s.rhat);
  const double divergence = fit.chains.divergence_rate();
  const double elapsed = seconds_since(start);
  const double budget = full ? 900.0 : 180.0;

  c.require(std::abs(fit_a - 0.2) <= 0.05,
            std::string("A_group ") + fmt(fit_a) + " within 0.2 +/- 0.05");
  c.require(std::abs(fit_tau - 3.0) <= 0.5,
            std::string("tau_group ") + fmt(fit_tau) + " within 3.0 +/- 0.5");
  c.require(worst_rhat <= 1.01, "max rhat " + fmt(worst_rhat) + " <= 1.01");
  c.require(divergence <= 0.02, "divergence rate " + fmt(divergence) + " <= 2%");
  c.require(elapsed < budget,
            "runtime " + fmt(elapsed) + "s < " + fmt(budget) + "s (" +
                (full ? "full 200x100" : "reduced 50x100") + ")");
  return c;
}

// --------------------------------------------------------------------------
// 8. Ceiling behaviour at per-run tau = 4.95.
// --------------------------------------------------------------------------
Criterion criterion8() {
  Criterion c;
  CohortSpec spec;
  spec.hyper.mu_a = normal_quantile(0.3);
  spec.hyper.sigma_a = 0.1;
  spec.hyper.mu_tau = normal_quantile(0.99);  // 5 * Phi = 4.95 for every run
  spec.hyper.sigma_tau = 0.0;
  spec.n_runs = 50;
  spec.n_trials = 100;
  spec.structure = preset_structure("asymmetric");
  spec.condition_id = "ceiling";
  const auto cohort = simulate_cohort(spec, 20240902);

  FitDataset data;
  data.structure_label = spec.structure.label;
  for (const CohortRun& run : cohort) {
    FitRun fit_run;
    for (const TrialRecord& t : run.log.trials) {
      fit_run.choices.push_back(t.choice == Choice::Y ? 1 : 0);
      fit_run.rewards.push_back(static_cast<std::uint8_t>(t.reward));
      fit_run.valid.push_back(1);
    }
    data.runs.push_back(std::move(fit_run));
  }

  SamplerConfig config;
  config.n_chains = 4;
  config.n_warmup = 1000;
  config.n_samples = 1000;
  config.master_seed = 43;
  const FitResult fit = fit_dataset(data, config);

  double fit_tau = 0.0;
  for (const ParameterSummary& s : fit.natural_group) {
    if (s.name == "tau_group") fit_tau = s.mean;
  }
  std::size_t upper = 0;
  const std::size_t total = fit.chains.total_draws();
  for (std::size_t chain = 0; chain < fit.chains.n_chains; ++chain) {
    for (std::size_t draw = 0; draw < fit.chains.n_draws; ++draw) {
      if (5.0 * normal_cdf(fit.chains.at(chain, draw, 2)) >= 4.5) ++upper;
    }
  }
  const double mass = static_cast<double>(upper) / static_cast<double>(total);
  c.require(fit_tau >= 4.5, "tau_group " + fmt(fit_tau) + " >= 4.5");
  c.require(mass >= 0.8,
            "posterior mass " + fmt(mass) + " >= 0.8 in the upper decile [4.5,5]");
  return c;
}

// --------------------------------------------------------------------------
// 9. ICC checks and the sigma = 0 range-restriction mechanism.
// --------------------------------------------------------------------------
Criterion criterion9() {
  Criterion c;
  Xoshiro256pp rng(5);

  std::vector<std::vector<double>> duplicated(10);
  for (auto& row : duplicated) {
    const double v = rng.normal();
    row = {v, v, v};
  }
  const auto icc_dup = icc31(duplicated);
  c.require(icc_dup.has_value() && *icc_dup == 1.0, "duplicated columns icc == 1 exactly");

  std::vector<std::vector<double>> offset(10);
  for (auto& row : offset) {
    const double v = rng.normal();
    row = {v, v + 0.7};
  }
  const auto icc_off = icc31(offset);
  c.require(icc_off.has_value() && std::abs(*icc_off - 1.0) <= 1e-9,
            "offset columns icc == 1 within 1e-9");

  std::vector<std::vector<double>> noise(1000);
  for (auto& row : noise) row = {rng.normal(), rng.normal()};
  const auto icc_noise = icc31(noise);
  c.require(icc_noise.has_value() && std::abs(*icc_noise) <= 0.1,
            "independent noise |icc| " + (icc_noise ? fmt(std::abs(*icc_noise)) : "n/a") +
                " <= 0.1");

  CohortSpec spec;
  spec.hyper = {normal_quantile(0.35), 0.0, 0.0, 0.0};  // every run identical
  spec.n_runs = 24;
  spec.n_trials = 120;
  spec.structure = preset_structure("symmetric");
  spec.condition_id = "flat-cohort";
  const auto cohort = simulate_cohort(spec, 77);
  FitDataset data;
  data.structure_label = spec.structure.label;
  for (const CohortRun& run : cohort) {
    FitRun fit_run;
    for (const TrialRecord& t : run.log.trials) {
      fit_run.choices.push_back(t.choice == Choice::Y ? 1 : 0);
      fit_run.rewards.push_back(static_cast<std::uint8_t>(t.reward));
      fit_run.valid.push_back(1);
    }
    data.runs.push_back(std::move(fit_run));
  }
  SamplerConfig config;
  config.n_chains = 2;
  config.n_warmup = 300;
  config.n_samples = 300;
  config.master_seed = 17;
  const ReliabilityResult rel = split_half_reliability(data, config);
  const auto near_zero = [&](const std::optional<double>& icc, const char* label) {
    const double v = icc ? std::abs(*icc) : 0.0;  // degenerate counts as zero signal
    c.require(v <= 0.35, std::string(label) + " |icc| " + fmt(v) + " <= 0.35 on sigma=0 cohort");
  };
  near_zero(rel.icc_tau, "tau");
  near_zero(rel.icc_a, "A");
  return c;
}

// --------------------------------------------------------------------------
// 10. Protocol fidelity: frozen prompts, strict parsing, invalid accounting.
// --------------------------------------------------------------------------
Criterion criterion10() {
  Criterion c;
  const std::string system_golden =
      "You are a space explorer in a game. Your task is to choose between "
      "visiting Planet X or Planet Y in each round, aiming to find as many "
      "gold coins as possible. The probability of finding gold coins on each "
      "planet is unknown at the start, but you can learn and adjust your "
      "strategy based on the outcomes of your previous visits. Respond with "
      "'X' for Planet X or 'Y' for Planet Y.";
  const std::string user_golden =
      "Your previous space travels went as follows:\n"
      "- In Trial 1, you went to Planet X and found 100 gold coins.\n"
      "- In Trial 2, you went to Planet X and found nothing.\n"
      "- In Trial 3, you went to Planet Y and found nothing.\n"
      "\n"
      "Q: Which planet do you want to go to in Trial 4?\n"
      "A: Planet";
  const History history{{1, Choice::X, 1}, {2, Choice::X, 0}, {3, Choice::Y, 0}};
  c.require(render_system_prompt() == system_golden, "system prompt byte-identical");
  c.require(render_user_prompt(history, 4) == user_golden, "3-trial user prompt byte-identical");

  const bool parse_ok =
      parse_choice_token("X") == Choice::X && parse_choice_token("Y") == Choice::Y &&
      parse_choice_token(" X \n") == Choice::X && parse_choice_token("x") == Choice::Invalid &&
      parse_choice_token("Planet X") == Choice::Invalid &&
      parse_choice_token("") == Choice::Invalid;
  c.require(parse_ok, "parse maps exactly {X, Y} after strip");

  ExperimentPlan plan;
  AgentSpec agent;
  agent.kind = "llm";
  agent.label = "mock";
  agent.provider = "script";
  agent.script_path = "unused.txt";
  plan.agents = {agent};
  plan.reward_structures = {"symmetric"};
  plan.n_runs = 2;
  plan.n_trials = 5;
  plan.warmup = 1;
  plan.master_seed = 11;

  const auto dir = std::filesystem::temp_directory_path() / "banditlab_accept_c10";
  std::filesystem::remove_all(dir);
  RunPlanOptions options;
  options.out_dir = dir.string();
  options.provider_factory = [](const Condition&) -> std::shared_ptr<ChatProvider> {
    return std::make_shared<ScriptedProvider>(std::vector<std::string>{
        "X", "Planet", "Y", "Y", "X", "Y", "Y", "Z", "X", "Y"});
  };
  const RunPlanResult result = run_plan(plan, options);
  const auto records = read_run_log_csv(result.log_files.at(0));
  int invalid_count = 0;
  bool invalid_ok = true;
  for (const auto& r : records) {
    if (r.choice == Choice::Invalid) {
      ++invalid_count;
      invalid_ok = invalid_ok && r.reward == 0;
    }
  }
  c.require(invalid_count == 2 && invalid_ok, "invalid tokens logged as reward-0 Invalid trials");
  c.require(result.summaries.at(0).invalid_rate == 0.2,
            "condition invalid rate reported separately (0.2)");
  return c;
}

// --------------------------------------------------------------------------
// 11. Determinism of synthetic plans.
// --------------------------------------------------------------------------
Criterion criterion11() {
  Criterion c;
  const char* plan_json = R"({
    "agents": [
      {"kind": "rw", "label": "learner", "learning_rate": 0.25, "inverse_temperature": 3.0},
      {"kind": "random"}
    ],
    "reward_structures": ["symmetric", "asymmetric"],
    "n_runs": 10,
    "n_trials": 30,
    "warmup": 5,
    "master_seed": 7
  })";
  const ExperimentPlan plan = plan_from_json(plan_json, "accept-c11");

  const auto run_into = [&](const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    RunPlanOptions options;
    options.out_dir = dir.string();
    run_plan(plan, options);
    return dir;
  };
  const auto dir_a = run_into("banditlab_accept_c11_a");
  const auto dir_b = run_into("banditlab_accept_c11_b");

  const auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  bool identical = true;
  int compared = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_a)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("runs_", 0) != 0) continue;
    ++compared;
    if (slurp(entry.path()) != slurp(dir_b / name)) identical = false;
  }
  c.require(compared == 4 && identical,
            "both executions produced byte-identical run logs (" + std::to_string(compared) +
                " files)");
  return c;
}

using CriterionFn = Criterion (*)();
const CriterionFn kCriteria[] = {criterion1, criterion2, criterion3, criterion4,
                                 criterion5, criterion6, criterion7, criterion8,
                                 criterion9, criterion10, criterion11};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > 11) {
      std::fprintf(stderr, "usage: %s [criterion 1..11]\n", argv[0]);
      return 2;
    }
  }

  bool all_ok = true;
  for (int i = 1; i <= 11; ++i) {
    if (only && i != only) continue;
    Criterion result;
    try {
      result = kCriteria[i - 1]();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %d: %s\n", result.ok ? "PASS" : "FAIL", i, result.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && result.ok;
  }
  return all_ok ? 0 : 1;
}
