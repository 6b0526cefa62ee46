#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "banditlab/agents.hpp"
#include "banditlab/csv.hpp"
#include "banditlab/env.hpp"
#include "banditlab/inference.hpp"
#include "banditlab/llm.hpp"
#include "banditlab/metrics.hpp"

namespace banditlab {

/// Invalid plan or arguments; maps to exit code 1.
class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Execution-time failure (I/O, provider); maps to exit code 2.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentSpec {
  std::string kind;      // oracle | random | epsilon_greedy | wsls | rw | llm
  std::string label;     // condition-id fragment; defaults to kind
  double epsilon = 0.1;
  double learning_rate = 0.0;
  double inverse_temperature = 0.0;
  bool x_primed = false;
  // llm only
  std::string provider;  // script | http
  std::string script_path;
  std::string base_url;
  std::string model;
  std::string api_key_env = "BANDITLAB_API_KEY";

  bool is_llm() const { return kind == "llm"; }
};

struct ExperimentPlan {
  std::vector<AgentSpec> agents;
  std::vector<std::string> reward_structures;  // preset names
  std::vector<std::string> decoding_configs;   // preset names; LLM agents only
  int n_runs = 200;
  int n_trials = 100;
  int warmup = 10;
  std::uint64_t master_seed = 0;
};

/// Parses and validates a JSON plan file. Unknown agent kinds, presets, or
/// out-of-range counts raise PlanError before anything executes.
ExperimentPlan load_plan(const std::string& path);
ExperimentPlan plan_from_json(const std::string& text, const std::string& context);

/// One cell of the factorial grid. Synthetic agents ignore decoding, so the
/// grid is |agents| x |structures| x (|decodings| for LLM agents, 1 otherwise).
struct Condition {
  std::string condition_id;   // "<agent>-<structure>[-<decoding>]"
  AgentSpec agent;
  RewardStructure structure;
  std::optional<SamplingConfig> decoding;
};

std::vector<Condition> expand_conditions(const ExperimentPlan& plan);

// Seed derivation, documented so external tooling can reproduce it:
//   condition_seed = seed_combine(master_seed, condition_id)
//   run_seed       = seed_combine(condition_seed, run_id)
//   env seed       = seed_combine(run_seed, "env")
//   agent seed     = seed_combine(run_seed, "agent")
std::uint64_t condition_seed(std::uint64_t master_seed, const std::string& condition_id);
std::uint64_t run_seed(std::uint64_t cond_seed, int run_id);

/// Plays one run: each trial asks the agent, draws a reward for valid
/// choices (invalid ones score 0 without consuming environment randomness),
/// and feeds the outcome back to the agent.
RunLog play_run(Agent& agent, BanditEnv& env, int n_trials,
                const std::string& condition_id, int run_id,
                const std::string* raw_token_source = nullptr);

struct RunPlanOptions {
  std::string out_dir;
  bool force = false;          // overwrite an existing completed output dir
  int max_requests = -1;       // live-LLM budget; < 0 means unlimited
  std::function<std::shared_ptr<ChatProvider>(const Condition&)> provider_factory;
};

struct RunPlanResult {
  std::vector<std::string> log_files;       // one per condition
  std::string summary_file;
  std::vector<ConditionSummary> summaries;
};

/// Executes a full plan: per-condition run-log CSVs, per-run metrics, and a
/// condition summary table, all under options.out_dir. Deterministic for
/// synthetic agents given equal master_seed. Refuses to touch an output
/// directory holding a previous summary unless options.force is set.
RunPlanResult run_plan(const ExperimentPlan& plan, const RunPlanOptions& options);

// ---------------------------------------------------------------------------
// Fitting and recovery entry points shared by the CLI and tests.
// ---------------------------------------------------------------------------

struct FitResult {
  Chains chains;
  std::vector<ParameterSummary> unconstrained;
  std::vector<ParameterSummary> natural_group;
  std::vector<RWParams> run_means;
  LoglikMatrix logliks;
};

/// Samples the hierarchical model for one dataset. FitQualityError passes
/// through; maps to exit code 3 at the CLI.
FitResult fit_dataset(const FitDataset& data, const SamplerConfig& config);

/// Writes summary/draws/run-means/loglik CSVs for one fit under `out_dir`
/// with the given file `stem`. Returns the summary path.
std::string write_fit_outputs(const std::string& out_dir, const std::string& stem,
                              const FitResult& fit);

struct RecoveryTolerance {
  double learning_rate = 0.05;      // |posterior mean - truth| bound, natural scale
  double inverse_temperature = 0.5;
};

struct RecoveryReport {
  double true_a = 0.0;
  double fit_a = 0.0;
  double true_tau = 0.0;
  double fit_tau = 0.0;
  bool a_ok = false;
  bool tau_ok = false;
  bool passed() const { return a_ok && tau_ok; }
};

/// End-to-end self test: simulates a cohort from known group parameters,
/// fits it, and compares natural-scale group means against truth.
RecoveryReport recover(const CohortSpec& spec, std::uint64_t sim_seed,
                       const SamplerConfig& sampler, const RecoveryTolerance& tol);

}  // namespace banditlab
