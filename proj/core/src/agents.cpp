#include "banditlab/agents.hpp"

#include <stdexcept>

#include "banditlab/stats.hpp"

namespace banditlab {

Choice RandomAgent::choose(const History&) {
  return rng_.uniform() < 0.5 ? Choice::X : Choice::Y;
}

OracleAgent::OracleAgent(const RewardStructure& structure) : target_(structure.target_arm()) {}

EpsilonGreedyAgent::EpsilonGreedyAgent(double epsilon, std::uint64_t seed)
    : epsilon_(epsilon), rng_(seed) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon must lie in [0,1]");
  }
}

Choice EpsilonGreedyAgent::choose(const History&) {
  if (rng_.uniform() < epsilon_) {
    return rng_.uniform() < 0.5 ? Choice::X : Choice::Y;
  }
  const double mean_x = count_[0] ? sum_[0] / count_[0] : 0.0;
  const double mean_y = count_[1] ? sum_[1] / count_[1] : 0.0;
  return mean_y > mean_x ? Choice::Y : Choice::X;
}

void EpsilonGreedyAgent::observe(const TrialRecord& record) {
  if (!is_valid(record.choice)) return;
  const int arm = record.choice == Choice::Y ? 1 : 0;
  sum_[arm] += static_cast<double>(record.reward);
  count_[arm] += 1;
}

Choice WslsAgent::choose(const History&) {
  if (!is_valid(last_choice_)) return Choice::X;
  if (last_reward_ == 1) return last_choice_;
  return last_choice_ == Choice::X ? Choice::Y : Choice::X;
}

void WslsAgent::observe(const TrialRecord& record) {
  if (!is_valid(record.choice)) return;
  last_choice_ = record.choice;
  last_reward_ = record.reward;
}

RWAgent::RWAgent(const RWConfig& config, std::uint64_t seed) : config_(config), rng_(seed) {
  if (!(config.learning_rate > 0.0 && config.learning_rate < 1.0)) {
    throw std::invalid_argument("learning rate must lie in (0,1)");
  }
  if (!(config.inverse_temperature >= 0.0 && config.inverse_temperature <= 5.0)) {
    throw std::invalid_argument("inverse temperature must lie in [0,5]");
  }
}

Choice RWAgent::choose(const History&) {
  if (first_ && config_.x_primed_first) {
    first_ = false;
    return Choice::X;
  }
  first_ = false;
  const double p_y = logistic(config_.inverse_temperature * (value_[1] - value_[0]));
  return rng_.uniform() < p_y ? Choice::Y : Choice::X;
}

void RWAgent::observe(const TrialRecord& record) {
  if (!is_valid(record.choice)) return;
  const int arm = record.choice == Choice::Y ? 1 : 0;
  value_[arm] = rw_update(value_[arm], config_.learning_rate, record.reward);
}

double rw_update(double value, double learning_rate, int reward) {
  return value + learning_rate * (static_cast<double>(reward) - value);
}

std::vector<CohortRun> simulate_cohort(const CohortSpec& spec, std::uint64_t master_seed) {
  if (spec.n_runs < 1) throw std::invalid_argument("cohort: need at least one run");
  if (spec.n_trials < 1) throw std::invalid_argument("cohort: need at least one trial");
  if (spec.hyper.sigma_a < 0.0 || spec.hyper.sigma_tau < 0.0) {
    throw std::invalid_argument("cohort: sigmas must be non-negative");
  }
  validate_structure(spec.structure);

  std::vector<CohortRun> out;
  out.reserve(static_cast<std::size_t>(spec.n_runs));
  for (int run_id = 0; run_id < spec.n_runs; ++run_id) {
    const std::uint64_t rseed = seed_combine(master_seed, static_cast<std::uint64_t>(run_id));
    Xoshiro256pp param_rng(seed_combine(rseed, "params"));
    const double z_a = param_rng.normal();
    const double z_tau = param_rng.normal();
    const RWParams params = transform_params(spec.hyper, z_a, z_tau);

    RWConfig config{params.learning_rate, params.inverse_temperature, spec.x_primed};
    RWAgent agent(config, seed_combine(rseed, "agent"));
    BanditEnv env(spec.structure, seed_combine(rseed, "env"));

    CohortRun cohort_run;
    cohort_run.true_params = params;
    cohort_run.log.condition_id = spec.condition_id;
    cohort_run.log.run_id = run_id;
    cohort_run.log.trials.reserve(static_cast<std::size_t>(spec.n_trials));
    History history;
    for (int t = 1; t <= spec.n_trials; ++t) {
      const Choice c = agent.choose(history);
      const int r = env.draw_reward(c).reward;
      TrialRecord record{t, c, r, std::string()};
      agent.observe(record);
      history.push_back({t, c, r});
      cohort_run.log.trials.push_back(std::move(record));
    }
    out.push_back(std::move(cohort_run));
  }
  return out;
}

}  // namespace banditlab
