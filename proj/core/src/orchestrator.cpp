#include "banditlab/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace banditlab {

namespace {

const std::vector<std::string> kAgentKinds = {"oracle", "random", "epsilon_greedy",
                                              "wsls", "rw", "llm"};

bool safe_label(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

void validate_plan(const ExperimentPlan& plan) {
  if (plan.agents.empty()) throw PlanError("plan: needs at least one agent");
  if (plan.reward_structures.empty()) throw PlanError("plan: needs at least one reward structure");
  if (plan.n_runs < 1) throw PlanError("plan: n_runs must be >= 1");
  if (plan.n_trials < 1) throw PlanError("plan: n_trials must be >= 1");
  if (plan.warmup < 0 || plan.warmup >= plan.n_trials) {
    throw PlanError("plan: warmup must lie in [0, n_trials)");
  }
  for (const std::string& name : plan.reward_structures) {
    try {
      preset_structure(name);
    } catch (const std::invalid_argument& e) {
      throw PlanError(std::string("plan: ") + e.what());
    }
  }
  for (const std::string& name : plan.decoding_configs) {
    try {
      sampling_preset(name);
    } catch (const std::invalid_argument& e) {
      throw PlanError(std::string("plan: ") + e.what());
    }
  }
  for (const AgentSpec& agent : plan.agents) {
    if (std::find(kAgentKinds.begin(), kAgentKinds.end(), agent.kind) == kAgentKinds.end()) {
      throw PlanError("plan: unknown agent kind '" + agent.kind + "'");
    }
    if (!safe_label(agent.label)) {
      throw PlanError("plan: agent label '" + agent.label +
                      "' must be non-empty [A-Za-z0-9_.-]");
    }
    if (agent.kind == "epsilon_greedy" && !(agent.epsilon >= 0.0 && agent.epsilon <= 1.0)) {
      throw PlanError("plan: epsilon must lie in [0,1]");
    }
    if (agent.kind == "rw") {
      if (!(agent.learning_rate > 0.0 && agent.learning_rate < 1.0)) {
        throw PlanError("plan: rw learning_rate must lie in (0,1)");
      }
      if (!(agent.inverse_temperature >= 0.0 && agent.inverse_temperature <= 5.0)) {
        throw PlanError("plan: rw inverse_temperature must lie in [0,5]");
      }
    }
    if (agent.is_llm()) {
      if (agent.provider != "script" && agent.provider != "http") {
        throw PlanError("plan: llm provider must be 'script' or 'http'");
      }
      if (agent.provider == "script" && agent.script_path.empty()) {
        throw PlanError("plan: script provider needs script_path");
      }
      if (agent.provider == "http" && (agent.base_url.empty() || agent.model.empty())) {
        throw PlanError("plan: http provider needs base_url and model");
      }
    }
  }
}

AgentSpec agent_from_json(const nlohmann::json& j, const std::string& context) {
  if (!j.is_object()) throw PlanError(context + ": agent entries must be objects");
  AgentSpec spec;
  spec.kind = j.value("kind", "");
  spec.label = j.value("label", spec.kind);
  spec.epsilon = j.value("epsilon", spec.epsilon);
  spec.learning_rate = j.value("learning_rate", spec.learning_rate);
  spec.inverse_temperature = j.value("inverse_temperature", spec.inverse_temperature);
  spec.x_primed = j.value("x_primed", spec.x_primed);
  spec.provider = j.value("provider", spec.provider);
  spec.script_path = j.value("script", spec.script_path);
  spec.base_url = j.value("base_url", spec.base_url);
  spec.model = j.value("model", spec.model);
  spec.api_key_env = j.value("api_key_env", spec.api_key_env);
  return spec;
}

}  // namespace

ExperimentPlan plan_from_json(const std::string& text, const std::string& context) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(context + ": " + e.what());
  }
  if (!j.is_object()) throw PlanError(context + ": plan must be a JSON object");

  ExperimentPlan plan;
  try {
    plan.n_runs = j.value("n_runs", plan.n_runs);
    plan.n_trials = j.value("n_trials", plan.n_trials);
    plan.warmup = j.value("warmup", plan.warmup);
    plan.master_seed = j.value("master_seed", plan.master_seed);
    if (j.contains("reward_structures")) {
      plan.reward_structures = j.at("reward_structures").get<std::vector<std::string>>();
    }
    if (j.contains("decoding_configs")) {
      plan.decoding_configs = j.at("decoding_configs").get<std::vector<std::string>>();
    }
    if (j.contains("agents")) {
      for (const auto& entry : j.at("agents")) {
        plan.agents.push_back(agent_from_json(entry, context));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(context + ": " + e.what());
  }
  validate_plan(plan);
  return plan;
}

ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlanError("cannot open plan file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return plan_from_json(buffer.str(), path);
}

std::vector<Condition> expand_conditions(const ExperimentPlan& plan) {
  validate_plan(plan);
  std::vector<Condition> out;
  for (const AgentSpec& agent : plan.agents) {
    for (const std::string& structure_name : plan.reward_structures) {
      const RewardStructure structure = preset_structure(structure_name);
      if (agent.is_llm() && !plan.decoding_configs.empty()) {
        for (const std::string& decoding_name : plan.decoding_configs) {
          Condition c;
          c.condition_id = agent.label + "-" + structure_name + "-" + decoding_name;
          c.agent = agent;
          c.structure = structure;
          c.decoding = sampling_preset(decoding_name);
          out.push_back(std::move(c));
        }
      } else {
        Condition c;
        c.condition_id = agent.label + "-" + structure_name;
        c.agent = agent;
        c.structure = structure;
        // An LLM agent without decoding presets runs provider-default-like.
        if (agent.is_llm()) c.decoding = sampling_preset("default_like");
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

std::uint64_t condition_seed(std::uint64_t master_seed, const std::string& condition_id) {
  return seed_combine(master_seed, condition_id);
}

std::uint64_t run_seed(std::uint64_t cond_seed, int run_id) {
  return seed_combine(cond_seed, static_cast<std::uint64_t>(run_id));
}

RunLog play_run(Agent& agent, BanditEnv& env, int n_trials,
                const std::string& condition_id, int run_id,
                const std::string* raw_token_source) {
  RunLog log;
  log.condition_id = condition_id;
  log.run_id = run_id;
  log.trials.reserve(static_cast<std::size_t>(n_trials));
  History history;
  history.reserve(static_cast<std::size_t>(n_trials));
  for (int t = 1; t <= n_trials; ++t) {
    Choice choice;
    bool provider_failed = false;
    try {
      choice = agent.choose(history);
    } catch (const LlmAuthError&) {
      throw;
    } catch (const LlmError& e) {
      // A degraded trial, not an aborted run: the protocol records it as
      // Invalid with reward 0 so every run reaches T trials.
      std::fprintf(stderr, "warning: %s run %d trial %d degraded to Invalid: %s\n",
                   condition_id.c_str(), run_id, t, e.what());
      choice = Choice::Invalid;
      provider_failed = true;
    }
    const int reward = env.draw_reward(choice).reward;
    TrialRecord record{t, choice,
                       reward, (!provider_failed && raw_token_source) ? *raw_token_source
                                                                      : std::string()};
    agent.observe(record);
    history.push_back({t, choice, reward});
    log.trials.push_back(std::move(record));
  }
  return log;
}

namespace {

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const RewardStructure& structure,
                                  std::uint64_t seed, std::shared_ptr<ChatProvider> provider) {
  if (spec.kind == "oracle") return std::make_unique<OracleAgent>(structure);
  if (spec.kind == "random") return std::make_unique<RandomAgent>(seed);
  if (spec.kind == "epsilon_greedy") {
    return std::make_unique<EpsilonGreedyAgent>(spec.epsilon, seed);
  }
  if (spec.kind == "wsls") return std::make_unique<WslsAgent>();
  if (spec.kind == "rw") {
    return std::make_unique<RWAgent>(
        RWConfig{spec.learning_rate, spec.inverse_temperature, spec.x_primed}, seed);
  }
  if (spec.kind == "llm") return std::make_unique<LlmAgent>(std::move(provider), spec.label);
  throw PlanError("unknown agent kind '" + spec.kind + "'");
}

std::shared_ptr<ChatProvider> default_provider(const Condition& condition,
                                               const std::shared_ptr<RateLimiter>& limiter) {
  const AgentSpec& spec = condition.agent;
  if (spec.provider == "script") {
    auto scripted = std::make_shared<ScriptedProvider>(ScriptedProvider::from_file(spec.script_path));
    return std::make_shared<RetryingProvider>(std::move(scripted), 3,
                                              std::chrono::milliseconds(1));
  }
  HttpProviderConfig config;
  config.base_url = spec.base_url;
  config.model = spec.model;
  config.api_key_env = spec.api_key_env;
  if (condition.decoding) config.sampling = *condition.decoding;
  return std::make_shared<HttpChatProvider>(config, limiter);
}

}  // namespace

RunPlanResult run_plan(const ExperimentPlan& plan, const RunPlanOptions& options) {
  validate_plan(plan);
  if (options.out_dir.empty()) throw PlanError("run: output directory required");

  const std::vector<Condition> conditions = expand_conditions(plan);

  if (options.max_requests >= 0) {
    long long llm_trials = 0;
    for (const Condition& c : conditions) {
      if (c.agent.is_llm()) {
        llm_trials += static_cast<long long>(plan.n_runs) * plan.n_trials;
      }
    }
    if (llm_trials > options.max_requests) {
      throw PlanError("run: plan needs " + std::to_string(llm_trials) +
                      " completions but max_requests is " +
                      std::to_string(options.max_requests));
    }
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw RunError("cannot create output directory '" + options.out_dir + "'");
  const std::string summary_path = options.out_dir + "/condition_summary.csv";
  if (fs::exists(summary_path) && !options.force) {
    throw RunError("output directory already holds a completed plan (" + summary_path +
                   "); use --force to overwrite");
  }

  auto limiter = std::make_shared<RateLimiter>(4, std::chrono::milliseconds(0));
  RunPlanResult result;
  std::vector<RunMetrics> all_run_metrics;

  for (const Condition& condition : conditions) {
    std::shared_ptr<ChatProvider> provider;
    if (condition.agent.is_llm()) {
      provider = options.provider_factory ? options.provider_factory(condition)
                                          : default_provider(condition, limiter);
    }

    const std::uint64_t cond_seed = condition_seed(plan.master_seed, condition.condition_id);
    std::vector<RunLogRecord> records;
    records.reserve(static_cast<std::size_t>(plan.n_runs) * plan.n_trials);
    std::vector<RunMetrics> metrics;
    metrics.reserve(static_cast<std::size_t>(plan.n_runs));

    for (int run_id = 0; run_id < plan.n_runs; ++run_id) {
      const std::uint64_t rseed = run_seed(cond_seed, run_id);
      BanditEnv env(condition.structure, seed_combine(rseed, "env"));
      const std::unique_ptr<Agent> agent =
          make_agent(condition.agent, condition.structure, seed_combine(rseed, "agent"), provider);
      const std::string* raw_source = nullptr;
      if (auto* llm = dynamic_cast<LlmAgent*>(agent.get())) raw_source = &llm->last_raw_token();

      const RunLog log = play_run(*agent, env, plan.n_trials, condition.condition_id, run_id,
                                  raw_source);
      for (const TrialRecord& trial : log.trials) {
        RunLogRecord record;
        record.condition_id = condition.condition_id;
        record.agent = condition.agent.label;
        record.reward_structure = condition.structure.label;
        if (condition.decoding) {
          record.temperature = condition.decoding->temperature;
          record.top_p = condition.decoding->top_p;
        }
        record.run_id = run_id;
        record.trial = trial.trial;
        record.choice = trial.choice;
        record.reward = trial.reward;
        record.raw_token = trial.raw_token;
        records.push_back(std::move(record));
      }
      metrics.push_back(run_metrics(log, condition.structure, plan.warmup));
    }

    const std::string log_path = options.out_dir + "/runs_" + condition.condition_id + ".csv";
    write_run_log_csv(log_path, records);
    result.log_files.push_back(log_path);
    result.summaries.push_back(condition_summary(metrics, plan.warmup));
    all_run_metrics.insert(all_run_metrics.end(), metrics.begin(), metrics.end());
  }

  write_run_metrics_csv(options.out_dir + "/run_metrics.csv", all_run_metrics);
  write_condition_summary_csv(summary_path, result.summaries);
  result.summary_file = summary_path;
  return result;
}

FitResult fit_dataset(const FitDataset& data, const SamplerConfig& config) {
  if (data.runs.size() < 2) {
    throw std::invalid_argument("fit: the hierarchy needs at least 2 runs");
  }
  HierarchicalModelDensity density(data);
  FitResult result;
  result.chains = sample(density, config);
  result.chains.names = param_names(data);
  result.unconstrained = summarize(result.chains);
  result.natural_group = group_natural_summaries(result.chains);
  result.run_means = per_run_posterior_means(result.chains, data.runs.size());
  result.logliks = per_run_loglik(result.chains, data);
  return result;
}

std::string write_fit_outputs(const std::string& out_dir, const std::string& stem,
                              const FitResult& fit) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw RunError("cannot create output directory '" + out_dir + "'");

  std::vector<ParameterSummary> rows = fit.unconstrained;
  rows.insert(rows.end(), fit.natural_group.begin(), fit.natural_group.end());
  const std::string summary_path = out_dir + "/" + stem + "_summary.csv";
  write_summary_csv(summary_path, rows);
  write_draws_csv(out_dir + "/" + stem + "_draws.csv", fit.chains);
  write_run_params_csv(out_dir + "/" + stem + "_run_params.csv", fit.run_means);
  write_loglik_csv(out_dir + "/" + stem + "_loglik.csv", fit.logliks);
  return summary_path;
}

RecoveryReport recover(const CohortSpec& spec, std::uint64_t sim_seed,
                       const SamplerConfig& sampler, const RecoveryTolerance& tol) {
  const std::vector<CohortRun> cohort = simulate_cohort(spec, sim_seed);

  FitDataset data;
  data.structure_label = spec.structure.label;
  data.runs.reserve(cohort.size());
  for (const CohortRun& run : cohort) {
    FitRun fit_run;
    fit_run.condition_id = run.log.condition_id;
    fit_run.run_id = run.log.run_id;
    for (const TrialRecord& t : run.log.trials) {
      fit_run.choices.push_back(t.choice == Choice::Y ? 1 : 0);
      fit_run.rewards.push_back(static_cast<std::uint8_t>(t.reward));
      fit_run.valid.push_back(is_valid(t.choice) ? 1 : 0);
    }
    data.runs.push_back(std::move(fit_run));
  }

  const FitResult fit = fit_dataset(data, sampler);

  RecoveryReport report;
  report.true_a = normal_cdf(spec.hyper.mu_a);
  report.true_tau = 5.0 * normal_cdf(spec.hyper.mu_tau);
  for (const ParameterSummary& s : fit.natural_group) {
    if (s.name == "A_group") report.fit_a = s.mean;
    if (s.name == "tau_group") report.fit_tau = s.mean;
  }
  report.a_ok = std::abs(report.fit_a - report.true_a) <= tol.learning_rate;
  report.tau_ok = std::abs(report.fit_tau - report.true_tau) <= tol.inverse_temperature;
  return report;
}

}  // namespace banditlab
