#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "banditlab/env.hpp"
#include "banditlab/metrics.hpp"
#include "banditlab/rw_model.hpp"

namespace banditlab {

/// Differentiable unnormalized log density over a flat parameter vector.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual std::size_t dim() const = 0;
  /// Returns log p(theta); writes d log p / d theta into grad (size dim()).
  virtual double value_and_grad(std::span<const double> theta,
                                std::span<double> grad) const = 0;
};

/// The hierarchical delta-rule model over a dataset, as a LogDensity.
/// Holds a reference; the dataset must outlive the density.
class HierarchicalModelDensity : public LogDensity {
 public:
  explicit HierarchicalModelDensity(const FitDataset& data) : data_(data) {}
  std::size_t dim() const override { return param_dim(data_); }
  double value_and_grad(std::span<const double> theta,
                        std::span<double> grad) const override {
    return joint_log_posterior_grad(theta, data_, grad);
  }
  const FitDataset& data() const { return data_; }

 private:
  const FitDataset& data_;
};

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 1000;
  int n_samples = 1000;
  double target_accept = 0.8;
  int n_leapfrog = 32;           // per-step count jittered in [max(1,L/2), L]
  std::uint64_t master_seed = 0;
};

/// Raised when a fit is unusable: divergence rate above 10% after warmup,
/// or no finite starting point within the retry budget.
class FitQualityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Post-warmup draws, chain-major: draw (c, i, p) lives at
/// [(c * n_draws + i) * dim + p].
struct Chains {
  std::size_t n_chains = 0;
  std::size_t n_draws = 0;   // per chain
  std::size_t dim = 0;
  std::vector<std::string> names;
  std::vector<double> draws;
  std::vector<int> divergences;        // per chain, post-warmup
  std::vector<double> step_sizes;      // adapted step size per chain
  std::vector<double> accept_rates;    // mean post-warmup accept prob per chain

  double at(std::size_t chain, std::size_t draw, std::size_t param) const {
    return draws[(chain * n_draws + draw) * dim + param];
  }
  /// One parameter's draws, chains concatenated in order.
  std::vector<double> parameter(std::size_t param) const;
  std::size_t total_draws() const { return n_chains * n_draws; }
  double divergence_rate() const;
};

/// Hamiltonian Monte Carlo with dual-averaging step-size adaptation and a
/// Stan-style windowed diagonal metric. Chains run sequentially and differ
/// only by seed; equal (config, model) pairs reproduce draws exactly.
/// Initial points are jittered Uniform(-0.1, 0.1) per coordinate; a
/// non-finite start is re-jittered up to 10 times before failing.
Chains sample(const LogDensity& model, const SamplerConfig& config);

// ---------------------------------------------------------------------------
// Convergence diagnostics.
// ---------------------------------------------------------------------------

/// Potential scale reduction over split chains: the larger of the
/// rank-normalized statistic and the plain one on raw draws (the plain form
/// keeps gross location splits visible where rank-normalization saturates).
/// Constant chains yield NaN.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Bulk effective sample size: Geyer initial-monotone-positive-sequence
/// truncation of combined-chain autocorrelations on rank-normalized draws.
double ess_bulk(const std::vector<std::vector<double>>& chains);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;    // empirical 2.5% quantile
  double ci_high = 0.0;   // empirical 97.5% quantile
  double rhat = 0.0;      // NaN when degenerate
  double ess = 0.0;
};

/// Per-parameter summaries over all chains. Requires >= 2 chains and
/// >= 4 draws per chain for the split diagnostics.
std::vector<ParameterSummary> summarize(const Chains& chains);

/// Natural-scale group summaries: per-draw Phi(mu_a) and 5 * Phi(mu_tau)
/// summarized like any parameter ("A_group", "tau_group").
std::vector<ParameterSummary> group_natural_summaries(const Chains& chains);

/// Posterior-mean natural-scale parameters per run: the mean over draws of
/// transform_params applied to that draw's hyper and run offsets.
std::vector<RWParams> per_run_posterior_means(const Chains& chains, std::size_t n_runs);

// ---------------------------------------------------------------------------
// Posterior predictive and pointwise likelihood.
// ---------------------------------------------------------------------------

struct PredictiveSummary {
  std::vector<MetricSummary> intervals;   // mean + central 95% predictive interval
  std::vector<RunMetrics> per_draw;
};

/// Simulates one fresh run per selected posterior draw: the draw supplies
/// the group hyper, a new standard-normal offset pair supplies the run, and
/// the metrics module scores the result. Draws are taken evenly spaced over
/// the chain store. Requires n_draws <= total draws; n_draws = 0 yields an
/// empty summary.
PredictiveSummary posterior_predictive(const Chains& chains, const RewardStructure& structure,
                                       int n_draws, int n_trials, int warmup,
                                       std::uint64_t seed);

/// Log-likelihood of every run under every draw's implied parameters,
/// row-major draws x runs.
struct LoglikMatrix {
  std::size_t n_draws = 0;
  std::size_t n_runs = 0;
  std::vector<double> values;
  double at(std::size_t draw, std::size_t run) const { return values[draw * n_runs + run]; }
};

LoglikMatrix per_run_loglik(const Chains& chains, const FitDataset& data);

// ---------------------------------------------------------------------------
// Reliability.
// ---------------------------------------------------------------------------

/// Two-way mixed, consistency, single-measure intraclass correlation:
/// (MS_R - MS_E) / (MS_R + (k-1) MS_E). Rows are subjects, columns repeated
/// measurements (all rows the same width k >= 2, n >= 3 rows). Zero total
/// variance is degenerate and yields nullopt.
std::optional<double> icc31(const std::vector<std::vector<double>>& measurements);

struct ReliabilityResult {
  std::optional<double> icc_a;
  std::optional<double> icc_tau;
  int n_subjects = 0;
  int k = 2;
};

/// Split-half reliability: fits the model independently to the first and
/// second half of every run's trials, then computes icc31 across runs on
/// per-run posterior means of each parameter. Trials per run must be even
/// and equal across runs. Fit-quality errors from either half propagate.
ReliabilityResult split_half_reliability(const FitDataset& data, const SamplerConfig& config);

}  // namespace banditlab
