#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "banditlab/inference.hpp"
#include "banditlab/rng.hpp"
#include "banditlab/stats.hpp"

namespace banditlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_chain_shape(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("diagnostics: need at least 2 chains");
  for (const auto& c : chains) {
    if (c.size() < 4) throw std::invalid_argument("diagnostics: need at least 4 draws per chain");
    if (c.size() != chains.front().size()) {
      throw std::invalid_argument("diagnostics: chains must have equal length");
    }
  }
}

std::vector<std::vector<double>> split_in_half(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  out.reserve(chains.size() * 2);
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Average ranks over the pooled draws (ties share their mean rank), then
// z = Phi^{-1}((rank - 3/8) / (S + 1/4)).
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
  struct Item {
    double value;
    std::size_t chain;
    std::size_t index;
  };
  std::vector<Item> items;
  std::size_t total = 0;
  for (const auto& c : chains) total += c.size();
  items.reserve(total);
  for (std::size_t j = 0; j < chains.size(); ++j) {
    for (std::size_t i = 0; i < chains[j].size(); ++i) items.push_back({chains[j][i], j, i});
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.value < b.value; });

  std::vector<std::vector<double>> z(chains.size());
  for (std::size_t j = 0; j < chains.size(); ++j) z[j].resize(chains[j].size());
  const double s = static_cast<double>(total);
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j + 1 < items.size() && items[j + 1].value == items[i].value) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    const double zval = normal_quantile((avg_rank - 0.375) / (s + 0.25));
    for (std::size_t k = i; k <= j; ++k) z[items[k].chain][items[k].index] = zval;
    i = j + 1;
  }
  return z;
}

// Classic potential-scale-reduction over already-split chains.
double rhat_of(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean(chains[j]);
    const double sd = sample_sd(chains[j]);
    vars[j] = sd * sd;
  }
  const double w = mean(vars);
  if (!(w > 0.0)) return kNaN;
  const double b_over_n = sample_sd(means) * sample_sd(means);
  const double var_hat = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_hat / w);
}

double chain_autocov(const std::vector<double>& x, double x_mean, std::size_t lag) {
  const std::size_t n = x.size();
  double sum = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) {
    sum += (x[i] - x_mean) * (x[i + lag] - x_mean);
  }
  return sum / static_cast<double>(n);
}

double ess_of(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean(chains[j]);
    const double sd = sample_sd(chains[j]);
    vars[j] = sd * sd;
  }
  const double w = mean(vars);
  const double var_means = m > 1 ? sample_sd(means) * sample_sd(means) : 0.0;
  const double var_plus = w * (static_cast<double>(n) - 1.0) / static_cast<double>(n) + var_means;
  if (!(var_plus > 0.0)) return kNaN;

  const auto mean_acov = [&](std::size_t lag) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum += chain_autocov(chains[j], means[j], lag);
    return sum / static_cast<double>(m);
  };

  // Geyer initial monotone positive sequence over lag pairs.
  double tau = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    const double rho_even = 1.0 - (w - mean_acov(lag)) / var_plus;
    const double rho_odd = 1.0 - (w - mean_acov(lag + 1)) / var_plus;
    double pair = rho_even + rho_odd;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau -= 1.0;
  const double s = static_cast<double>(m * n);
  tau = std::max(tau, 1.0 / std::log10(s + 1.0));
  return s / tau;
}

std::vector<std::vector<double>> chains_of_parameter(const Chains& chains, std::size_t param) {
  std::vector<std::vector<double>> out(chains.n_chains);
  for (std::size_t c = 0; c < chains.n_chains; ++c) {
    out[c].resize(chains.n_draws);
    for (std::size_t d = 0; d < chains.n_draws; ++d) out[c][d] = chains.at(c, d, param);
  }
  return out;
}

ParameterSummary summarize_values(const std::string& name,
                                  const std::vector<std::vector<double>>& per_chain) {
  ParameterSummary s;
  s.name = name;
  std::vector<double> all;
  for (const auto& c : per_chain) all.insert(all.end(), c.begin(), c.end());
  s.mean = mean(all);
  s.sd = all.size() > 1 ? sample_sd(all) : 0.0;
  std::sort(all.begin(), all.end());
  s.ci_low = quantile_sorted(all, 0.025);
  s.ci_high = quantile_sorted(all, 0.975);
  if (per_chain.size() >= 2 && per_chain.front().size() >= 4) {
    s.rhat = split_rhat(per_chain);
    s.ess = ess_bulk(per_chain);
  } else {
    s.rhat = kNaN;
    s.ess = kNaN;
  }
  if (!(s.ci_low <= s.mean && s.mean <= s.ci_high)) {
    std::fprintf(stderr, "warning: %s: mean %.6g outside central interval [%.6g, %.6g]\n",
                 name.c_str(), s.mean, s.ci_low, s.ci_high);
  }
  return s;
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
  check_chain_shape(chains);
  const auto split = split_in_half(chains);
  const double plain = rhat_of(split);
  const double ranked = rhat_of(rank_normalize(split));
  if (std::isnan(plain) || std::isnan(ranked)) return kNaN;
  return std::max(plain, ranked);
}

double ess_bulk(const std::vector<std::vector<double>>& chains) {
  check_chain_shape(chains);
  return ess_of(rank_normalize(split_in_half(chains)));
}

std::vector<ParameterSummary> summarize(const Chains& chains) {
  std::vector<ParameterSummary> out;
  out.reserve(chains.dim);
  for (std::size_t p = 0; p < chains.dim; ++p) {
    out.push_back(summarize_values(chains.names.at(p), chains_of_parameter(chains, p)));
  }
  return out;
}

std::vector<ParameterSummary> group_natural_summaries(const Chains& chains) {
  if (chains.dim < 4) throw std::invalid_argument("group summaries: need the 4 hyper coordinates");
  std::vector<std::vector<double>> a(chains.n_chains), tau(chains.n_chains);
  for (std::size_t c = 0; c < chains.n_chains; ++c) {
    a[c].resize(chains.n_draws);
    tau[c].resize(chains.n_draws);
    for (std::size_t d = 0; d < chains.n_draws; ++d) {
      a[c][d] = normal_cdf(chains.at(c, d, 0));
      tau[c][d] = 5.0 * normal_cdf(chains.at(c, d, 2));
    }
  }
  return {summarize_values("A_group", a), summarize_values("tau_group", tau)};
}

std::vector<RWParams> per_run_posterior_means(const Chains& chains, std::size_t n_runs) {
  if (chains.dim != 4 + 2 * n_runs) {
    throw std::invalid_argument("per-run means: chain dimension does not match run count");
  }
  std::vector<RWParams> out(n_runs, RWParams{0.0, 0.0});
  const double total = static_cast<double>(chains.total_draws());
  std::vector<double> theta(chains.dim);
  for (std::size_t c = 0; c < chains.n_chains; ++c) {
    for (std::size_t d = 0; d < chains.n_draws; ++d) {
      const double* row = &chains.draws[(c * chains.n_draws + d) * chains.dim];
      std::copy(row, row + chains.dim, theta.begin());
      for (std::size_t i = 0; i < n_runs; ++i) {
        const RWParams p = params_for_run(theta, i);
        out[i].learning_rate += p.learning_rate / total;
        out[i].inverse_temperature += p.inverse_temperature / total;
      }
    }
  }
  return out;
}

PredictiveSummary posterior_predictive(const Chains& chains, const RewardStructure& structure,
                                       int n_draws, int n_trials, int warmup,
                                       std::uint64_t seed) {
  if (n_draws < 0 || static_cast<std::size_t>(n_draws) > chains.total_draws()) {
    throw std::invalid_argument("posterior predictive: n_draws outside [0, total draws]");
  }
  PredictiveSummary out;
  if (n_draws == 0) return out;

  Xoshiro256pp z_rng(seed_combine(seed, "latents"));
  std::vector<double> theta(chains.dim);
  for (int k = 0; k < n_draws; ++k) {
    const std::size_t flat =
        (static_cast<std::size_t>(k) * chains.total_draws()) / static_cast<std::size_t>(n_draws);
    const double* row = &chains.draws[flat * chains.dim];
    std::copy(row, row + chains.dim, theta.begin());
    const GroupHyper hyper = hyper_from_theta(theta);
    const RWParams params = transform_params(hyper, z_rng.normal(), z_rng.normal());
    const FitRun sim = simulate_run(params, structure, n_trials,
                                    seed_combine(seed, static_cast<std::uint64_t>(k)));

    RunLog log;
    log.condition_id = "predictive";
    log.run_id = k;
    log.trials.reserve(sim.choices.size());
    for (std::size_t t = 0; t < sim.choices.size(); ++t) {
      log.trials.push_back({static_cast<int>(t) + 1,
                            sim.choices[t] ? Choice::Y : Choice::X,
                            static_cast<int>(sim.rewards[t]), ""});
    }
    out.per_draw.push_back(run_metrics(log, structure, warmup));
  }

  const auto add_interval = [&](const std::string& name, auto getter) {
    std::vector<double> values;
    for (const RunMetrics& m : out.per_draw) {
      if (const auto v = getter(m)) values.push_back(*v);
    }
    if (values.empty()) return;
    MetricSummary s;
    s.metric = name;
    s.mean = mean(values);
    std::sort(values.begin(), values.end());
    s.ci_low = quantile_sorted(values, 0.025);
    s.ci_high = quantile_sorted(values, 0.975);
    s.n = static_cast<int>(values.size());
    out.intervals.push_back(s);
  };
  add_interval("total_reward", [](const RunMetrics& m) {
    return std::optional<double>(static_cast<double>(m.total_reward));
  });
  add_interval("target_rate",
               [](const RunMetrics& m) { return std::optional<double>(m.target_rate); });
  add_interval("c_bar", [](const RunMetrics& m) { return m.c_bar; });
  add_interval("choice_bias", [](const RunMetrics& m) { return m.choice_bias; });
  add_interval("loss_shift", [](const RunMetrics& m) { return m.loss_shift; });
  add_interval("win_shift", [](const RunMetrics& m) { return m.win_shift; });
  add_interval("post_warmup_loss_shift",
               [](const RunMetrics& m) { return m.post_warmup_loss_shift; });
  add_interval("post_warmup_win_shift",
               [](const RunMetrics& m) { return m.post_warmup_win_shift; });
  add_interval("adjusted_choice_bias",
               [](const RunMetrics& m) { return m.adjusted_choice_bias; });
  return out;
}

LoglikMatrix per_run_loglik(const Chains& chains, const FitDataset& data) {
  if (chains.dim != param_dim(data)) {
    throw std::invalid_argument("per-run loglik: chain dimension does not match dataset");
  }
  LoglikMatrix out;
  out.n_draws = chains.total_draws();
  out.n_runs = data.runs.size();
  out.values.resize(out.n_draws * out.n_runs);
  std::vector<double> theta(chains.dim);
  std::size_t row_index = 0;
  for (std::size_t c = 0; c < chains.n_chains; ++c) {
    for (std::size_t d = 0; d < chains.n_draws; ++d, ++row_index) {
      const double* row = &chains.draws[(c * chains.n_draws + d) * chains.dim];
      std::copy(row, row + chains.dim, theta.begin());
      for (std::size_t i = 0; i < out.n_runs; ++i) {
        out.values[row_index * out.n_runs + i] =
            run_loglik(params_for_run(theta, i), data.runs[i]);
      }
    }
  }
  return out;
}

std::optional<double> icc31(const std::vector<std::vector<double>>& measurements) {
  const std::size_t n = measurements.size();
  if (n < 3) throw std::invalid_argument("icc31: need at least 3 subjects");
  const std::size_t k = measurements.front().size();
  if (k < 2) throw std::invalid_argument("icc31: need at least 2 measurements per subject");
  for (const auto& row : measurements) {
    if (row.size() != k) throw std::invalid_argument("icc31: ragged measurement matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument("icc31: non-finite measurement");
    }
  }

  double grand = 0.0;
  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      row_mean[i] += measurements[i][j];
      col_mean[j] += measurements[i][j];
      grand += measurements[i][j];
    }
  }
  for (double& v : row_mean) v /= static_cast<double>(k);
  for (double& v : col_mean) v /= static_cast<double>(n);
  grand /= static_cast<double>(n * k);

  double ss_rows = 0.0, ss_err = 0.0, ss_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double rd = row_mean[i] - grand;
    ss_rows += rd * rd;
    for (std::size_t j = 0; j < k; ++j) {
      // Residual form keeps MS_E exactly zero for column-offset data.
      const double resid = (measurements[i][j] - row_mean[i]) - (col_mean[j] - grand);
      ss_err += resid * resid;
      const double td = measurements[i][j] - grand;
      ss_total += td * td;
    }
  }
  ss_rows *= static_cast<double>(k);

  if (ss_total == 0.0) return std::nullopt;
  const double ms_rows = ss_rows / static_cast<double>(n - 1);
  const double ms_err = ss_err / static_cast<double>((n - 1) * (k - 1));
  const double denom = ms_rows + static_cast<double>(k - 1) * ms_err;
  if (denom == 0.0) return std::nullopt;
  return (ms_rows - ms_err) / denom;
}

ReliabilityResult split_half_reliability(const FitDataset& data, const SamplerConfig& config) {
  if (data.runs.size() < 3) {
    throw std::invalid_argument("split-half: need at least 3 runs");
  }
  const std::size_t t = data.runs.front().choices.size();
  if (t % 2 != 0) throw std::invalid_argument("split-half: trial count must be even");
  for (const FitRun& run : data.runs) {
    if (run.choices.size() != t) {
      throw std::invalid_argument("split-half: runs must share one trial count");
    }
  }

  const auto slice = [&](std::size_t begin, std::size_t end) {
    FitDataset half;
    half.structure_label = data.structure_label;
    half.runs.reserve(data.runs.size());
    for (const FitRun& run : data.runs) {
      FitRun h;
      h.condition_id = run.condition_id;
      h.run_id = run.run_id;
      h.choices.assign(run.choices.begin() + static_cast<std::ptrdiff_t>(begin),
                       run.choices.begin() + static_cast<std::ptrdiff_t>(end));
      h.rewards.assign(run.rewards.begin() + static_cast<std::ptrdiff_t>(begin),
                       run.rewards.begin() + static_cast<std::ptrdiff_t>(end));
      h.valid.assign(run.valid.begin() + static_cast<std::ptrdiff_t>(begin),
                     run.valid.begin() + static_cast<std::ptrdiff_t>(end));
      half.runs.push_back(std::move(h));
    }
    return half;
  };

  const FitDataset first = slice(0, t / 2);
  const FitDataset second = slice(t / 2, t);

  const auto fit_half = [&](const FitDataset& half, std::string_view tag) {
    SamplerConfig half_config = config;
    half_config.master_seed = seed_combine(config.master_seed, tag);
    HierarchicalModelDensity density(half);
    Chains chains = sample(density, half_config);
    return per_run_posterior_means(chains, half.runs.size());
  };
  const std::vector<RWParams> means_first = fit_half(first, "half1");
  const std::vector<RWParams> means_second = fit_half(second, "half2");

  std::vector<std::vector<double>> a_rows, tau_rows;
  a_rows.reserve(data.runs.size());
  tau_rows.reserve(data.runs.size());
  for (std::size_t i = 0; i < data.runs.size(); ++i) {
    a_rows.push_back({means_first[i].learning_rate, means_second[i].learning_rate});
    tau_rows.push_back({means_first[i].inverse_temperature, means_second[i].inverse_temperature});
  }

  ReliabilityResult result;
  result.n_subjects = static_cast<int>(data.runs.size());
  result.k = 2;
  result.icc_a = icc31(a_rows);
  result.icc_tau = icc31(tau_rows);
  return result;
}

}  // namespace banditlab
