#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "banditlab/env.hpp"
#include "banditlab/rng.hpp"
#include "banditlab/rw_model.hpp"
#include "banditlab/types.hpp"

namespace banditlab {

/// Synthetic decision policy. `choose` may consume randomness; `observe`
/// feeds back the completed trial (including invalid ones).
class Agent {
 public:
  virtual ~Agent() = default;
  virtual Choice choose(const History& history) = 0;
  virtual void observe(const TrialRecord& record) = 0;
  virtual std::string name() const = 0;
};

/// Uniform coin flip between the two arms.
class RandomAgent : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}
  Choice choose(const History&) override;
  void observe(const TrialRecord&) override {}
  std::string name() const override { return "random"; }

 private:
  Xoshiro256pp rng_;
};

/// Always picks the arm with the higher true reward probability
/// (X on ties). Upper bound for the expected-reward comparisons.
class OracleAgent : public Agent {
 public:
  explicit OracleAgent(const RewardStructure& structure);
  Choice choose(const History&) override { return target_; }
  void observe(const TrialRecord&) override {}
  std::string name() const override { return "oracle"; }

 private:
  Choice target_;
};

/// Empirical-mean greedy with epsilon exploration. Unvisited arms count as
/// mean 0; ties break to X.
class EpsilonGreedyAgent : public Agent {
 public:
  EpsilonGreedyAgent(double epsilon, std::uint64_t seed);
  Choice choose(const History&) override;
  void observe(const TrialRecord& record) override;
  std::string name() const override { return "epsilon_greedy"; }

 private:
  double epsilon_;
  Xoshiro256pp rng_;
  double sum_[2] = {0.0, 0.0};
  int count_[2] = {0, 0};
};

/// Win-stay/lose-shift keyed on the last valid trial; first choice is X.
class WslsAgent : public Agent {
 public:
  WslsAgent() = default;
  Choice choose(const History&) override;
  void observe(const TrialRecord& record) override;
  std::string name() const override { return "wsls"; }

 private:
  Choice last_choice_ = Choice::Invalid;
  int last_reward_ = 0;
};

struct RWConfig {
  double learning_rate = 0.0;
  double inverse_temperature = 0.0;
  bool x_primed_first = false;  // deterministic X on trial 1, no RNG draw
};

/// Rescorla-Wagner learner with softmax choice. Each free choice consumes
/// exactly one uniform draw: picks Y iff u < P(Y). Values start at 0 and
/// update only on valid trials.
class RWAgent : public Agent {
 public:
  RWAgent(const RWConfig& config, std::uint64_t seed);
  Choice choose(const History& history) override;
  void observe(const TrialRecord& record) override;
  std::string name() const override { return "rescorla_wagner"; }

  double value_x() const { return value_[0]; }
  double value_y() const { return value_[1]; }

 private:
  RWConfig config_;
  Xoshiro256pp rng_;
  double value_[2] = {0.0, 0.0};
  bool first_ = true;
};

/// One delta-rule step: value + learning_rate * (reward - value).
double rw_update(double value, double learning_rate, int reward);

/// Cohort of RW runs with per-run parameters drawn from the group-level
/// hierarchy (z ~ N(0,1), probit transform).
struct CohortSpec {
  GroupHyper hyper;
  int n_runs = 0;
  int n_trials = 0;
  RewardStructure structure;
  bool x_primed = false;
  std::string condition_id;
};

struct CohortRun {
  RunLog log;
  RWParams true_params;
};

/// Simulates the cohort deterministically from `master_seed`: run i uses
/// seed_combine(master_seed, i) split into parameter-draw and play streams.
/// Negative sigmas throw std::invalid_argument.
std::vector<CohortRun> simulate_cohort(const CohortSpec& spec, std::uint64_t master_seed);

}  // namespace banditlab
