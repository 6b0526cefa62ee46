#pragma once

#include <optional>
#include <string>
#include <vector>

#include "banditlab/env.hpp"
#include "banditlab/stats.hpp"
#include "banditlab/types.hpp"

namespace banditlab {

/// Behavioural indices of one run. Invalid trials count toward n_trials,
/// target_rate's denominator, and reward totals, but are excluded from
/// c_bar, the shift numerators/denominators, and the monomorphy judgment.
/// Metrics whose denominator is empty are absent rather than 0/0.
struct RunMetrics {
  std::string condition_id;
  int run_id = 0;
  int n_trials = 0;
  int n_valid = 0;
  int total_reward = 0;
  double target_rate = 0.0;                       // valid target choices / n_trials
  std::optional<double> c_bar;                    // P(choose Y) among valid
  std::optional<double> choice_bias;              // c_bar - 0.5
  std::optional<double> loss_shift;               // P(switch | r_t = 0), all trials
  std::optional<double> win_shift;                // P(switch | r_t = 1), all trials
  std::optional<double> post_warmup_loss_shift;   // same, pairs at t > warmup
  std::optional<double> post_warmup_win_shift;
  bool post_warmup_monomorphic = false;
  std::optional<double> adjusted_choice_bias;     // target_rate - 0.90, asymmetric only
};

/// Computes run-level metrics with the post-warm-up window covering trials
/// warmup+1 .. T. Shift transitions require both endpoints valid; a
/// post-warm-up pair is one whose antecedent trial index exceeds warmup.
/// Preconditions: T >= 1 and 0 <= warmup < T (std::invalid_argument).
RunMetrics run_metrics(const RunLog& run, const RewardStructure& structure, int warmup);

/// One aggregated metric across runs: mean with a normal-approximation 95%
/// CI and the count of runs where the metric was defined.
struct MetricSummary {
  std::string metric;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;
};

struct ConditionSummary {
  std::string condition_id;
  int n_runs = 0;
  int warmup = 0;
  std::vector<MetricSummary> metrics;   // fixed emission order
  double stubbornness_rate = 0.0;       // fraction with c_bar >= 0.8 or <= 0.2
  double amplification_index = 0.0;     // fraction post-warm-up monomorphic
  double rigidity_index = 0.0;          // 1 - mean post-warm-up loss shift
  double invalid_rate = 0.0;            // invalid trials / all trials

  const MetricSummary* find(const std::string& metric) const;
};

/// Aggregates run metrics for one condition. Metrics absent in a run are
/// omitted from that metric's mean; n records the contributing runs.
/// Requires at least 2 runs (std::invalid_argument) so the CI is defined.
ConditionSummary condition_summary(const std::vector<RunMetrics>& runs, int warmup);

/// Reference points for sanity checks: an oracle on the asymmetric structure
/// approaches T * max(p) rewards at target rate 1; under a symmetric
/// structure every policy earns T * p and target rate is the 0.5 chance
/// level. Requires T >= 1.
struct OracleBenchmark {
  double expected_total = 0.0;
  double expected_target_rate = 0.0;
};

OracleBenchmark oracle_benchmarks(const RewardStructure& structure, int n_trials);

}  // namespace banditlab
