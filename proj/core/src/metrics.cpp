#include "banditlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace banditlab {

RunMetrics run_metrics(const RunLog& run, const RewardStructure& structure, int warmup) {
  const int t_total = static_cast<int>(run.trials.size());
  if (t_total < 1) throw std::invalid_argument("run_metrics: empty run");
  if (warmup < 0 || warmup >= t_total) {
    throw std::invalid_argument("run_metrics: warmup must lie in [0, T)");
  }
  validate_structure(structure);
  const Choice target = structure.target_arm();

  RunMetrics m;
  m.condition_id = run.condition_id;
  m.run_id = run.run_id;
  m.n_trials = t_total;

  int n_valid = 0, n_y = 0, n_target = 0;
  for (const TrialRecord& trial : run.trials) {
    m.total_reward += trial.reward;
    if (!is_valid(trial.choice)) continue;
    ++n_valid;
    if (trial.choice == Choice::Y) ++n_y;
    if (trial.choice == target) ++n_target;
  }
  m.n_valid = n_valid;
  m.target_rate = static_cast<double>(n_target) / t_total;
  if (n_valid > 0) {
    m.c_bar = static_cast<double>(n_y) / n_valid;
    m.choice_bias = *m.c_bar - 0.5;
  }

  // Shift rates over consecutive pairs with both choices valid; the
  // post-warm-up variant keeps pairs whose antecedent trial is past the
  // warm-up window (both endpoints then lie inside it).
  int losses = 0, loss_switches = 0, wins = 0, win_switches = 0;
  int pw_losses = 0, pw_loss_switches = 0, pw_wins = 0, pw_win_switches = 0;
  for (int t = 0; t + 1 < t_total; ++t) {
    const TrialRecord& cur = run.trials[static_cast<std::size_t>(t)];
    const TrialRecord& nxt = run.trials[static_cast<std::size_t>(t + 1)];
    if (!is_valid(cur.choice) || !is_valid(nxt.choice)) continue;
    const bool switched = cur.choice != nxt.choice;
    const bool post_warmup = cur.trial > warmup;
    if (cur.reward == 0) {
      ++losses;
      loss_switches += switched;
      if (post_warmup) {
        ++pw_losses;
        pw_loss_switches += switched;
      }
    } else {
      ++wins;
      win_switches += switched;
      if (post_warmup) {
        ++pw_wins;
        pw_win_switches += switched;
      }
    }
  }
  if (losses) m.loss_shift = static_cast<double>(loss_switches) / losses;
  if (wins) m.win_shift = static_cast<double>(win_switches) / wins;
  if (pw_losses) m.post_warmup_loss_shift = static_cast<double>(pw_loss_switches) / pw_losses;
  if (pw_wins) m.post_warmup_win_shift = static_cast<double>(pw_win_switches) / pw_wins;

  bool any_pw_valid = false;
  bool monomorphic = true;
  Choice first_pw = Choice::Invalid;
  for (const TrialRecord& trial : run.trials) {
    if (trial.trial <= warmup || !is_valid(trial.choice)) continue;
    if (!any_pw_valid) {
      any_pw_valid = true;
      first_pw = trial.choice;
    } else if (trial.choice != first_pw) {
      monomorphic = false;
      break;
    }
  }
  m.post_warmup_monomorphic = any_pw_valid && monomorphic;

  if (!structure.symmetric()) m.adjusted_choice_bias = m.target_rate - 0.90;
  return m;
}

namespace {

void add_summary(std::vector<MetricSummary>& out, const std::string& name,
                 const std::vector<double>& values) {
  if (values.empty()) return;
  const MeanCi ci = normal_approx_ci(values);
  out.push_back({name, ci.mean, ci.lo, ci.hi, static_cast<int>(ci.n)});
}

}  // namespace

const MetricSummary* ConditionSummary::find(const std::string& metric) const {
  for (const MetricSummary& m : metrics) {
    if (m.metric == metric) return &m;
  }
  return nullptr;
}

ConditionSummary condition_summary(const std::vector<RunMetrics>& runs, int warmup) {
  if (runs.size() < 2) {
    throw std::invalid_argument("condition_summary: need at least 2 runs for a CI");
  }
  ConditionSummary s;
  s.condition_id = runs.front().condition_id;
  s.n_runs = static_cast<int>(runs.size());
  s.warmup = warmup;

  std::vector<double> total, target, c_bar, bias, loss, win, pw_loss, pw_win, adjusted;
  int stubborn = 0, monomorphic = 0;
  long long trials = 0, valid = 0;
  for (const RunMetrics& r : runs) {
    total.push_back(static_cast<double>(r.total_reward));
    target.push_back(r.target_rate);
    if (r.c_bar) c_bar.push_back(*r.c_bar);
    if (r.choice_bias) bias.push_back(*r.choice_bias);
    if (r.loss_shift) loss.push_back(*r.loss_shift);
    if (r.win_shift) win.push_back(*r.win_shift);
    if (r.post_warmup_loss_shift) pw_loss.push_back(*r.post_warmup_loss_shift);
    if (r.post_warmup_win_shift) pw_win.push_back(*r.post_warmup_win_shift);
    if (r.adjusted_choice_bias) adjusted.push_back(*r.adjusted_choice_bias);
    if (r.c_bar && (*r.c_bar >= 0.8 || *r.c_bar <= 0.2)) ++stubborn;
    if (r.post_warmup_monomorphic) ++monomorphic;
    trials += r.n_trials;
    valid += r.n_valid;
  }

  add_summary(s.metrics, "total_reward", total);
  add_summary(s.metrics, "target_rate", target);
  add_summary(s.metrics, "c_bar", c_bar);
  add_summary(s.metrics, "choice_bias", bias);
  add_summary(s.metrics, "loss_shift", loss);
  add_summary(s.metrics, "win_shift", win);
  add_summary(s.metrics, "post_warmup_loss_shift", pw_loss);
  add_summary(s.metrics, "post_warmup_win_shift", pw_win);
  add_summary(s.metrics, "adjusted_choice_bias", adjusted);

  s.stubbornness_rate = static_cast<double>(stubborn) / s.n_runs;
  s.amplification_index = static_cast<double>(monomorphic) / s.n_runs;
  s.rigidity_index = pw_loss.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : 1.0 - mean(pw_loss);
  s.invalid_rate = trials ? static_cast<double>(trials - valid) / trials : 0.0;
  return s;
}

OracleBenchmark oracle_benchmarks(const RewardStructure& structure, int n_trials) {
  if (n_trials < 1) throw std::invalid_argument("oracle_benchmarks: need T >= 1");
  validate_structure(structure);
  OracleBenchmark b;
  if (structure.symmetric()) {
    b.expected_total = n_trials * structure.p_x;
    b.expected_target_rate = 0.5;
  } else {
    b.expected_total = n_trials * std::max(structure.p_x, structure.p_y);
    b.expected_target_rate = 1.0;
  }
  return b;
}

}  // namespace banditlab
