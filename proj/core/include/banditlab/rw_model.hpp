#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "banditlab/env.hpp"

namespace banditlab {

/// Per-run parameters on the natural scale.
struct RWParams {
  double learning_rate = 0.0;       // in (0, 1)
  double inverse_temperature = 0.0; // in [0, 5]
};

/// Group-level location/scale on the unconstrained (probit-input) scale.
/// Priors: mu ~ Normal(0, 1), sigma ~ half-Normal(0, 0.2).
struct GroupHyper {
  double mu_a = 0.0;
  double sigma_a = 0.0;
  double mu_tau = 0.0;
  double sigma_tau = 0.0;
};

/// Per-run standard-normal offsets of the non-centered hierarchy.
struct LatentVector {
  std::vector<double> z_a;
  std::vector<double> z_tau;
};

/// Probit transform of the hierarchy:
///   learning rate      = Phi(mu_a + sigma_a * z_a)
///   inverse temperature = 5 * Phi(mu_tau + sigma_tau * z_tau)
/// Outputs are clamped away from the closed endpoints so they stay strictly
/// inside (0,1) / (0,5) even where Phi underflows in double precision.
RWParams transform_params(const GroupHyper& hyper, double z_a, double z_tau);

/// One run of fit-ready data. Masked (invalid) trials carry no likelihood
/// and trigger no value update; their choice entry is ignored.
struct FitRun {
  std::vector<std::uint8_t> choices;  // 0 = X, 1 = Y
  std::vector<std::uint8_t> rewards;  // 0 or 1
  std::vector<std::uint8_t> valid;    // 1 = trial enters the likelihood
  std::string condition_id;
  int run_id = 0;
};

struct FitDataset {
  std::vector<FitRun> runs;
  std::string structure_label;
};

/// Delta-rule/softmax log-likelihood of one run. Values start at zero; each
/// valid trial contributes log P(observed choice) with
/// P(Y) = logistic(tau * (V_y - V_x)) and then updates the chosen arm's
/// value by learning_rate * (reward - value).
double run_loglik(const RWParams& params, const FitRun& run);

// ---------------------------------------------------------------------------
// Unconstrained joint posterior.
//
// Parameter vector layout (dimension 4 + 2N for N runs):
//   [0] mu_a   [1] log sigma_a   [2] mu_tau   [3] log sigma_tau
//   [4 .. 4+N)     z_a per run
//   [4+N .. 4+2N)  z_tau per run
// The sigma coordinates carry the log-transform Jacobian so the density is
// with respect to the unconstrained vector.
// ---------------------------------------------------------------------------

std::size_t param_dim(const FitDataset& data);

std::vector<std::string> param_names(const FitDataset& data);

/// Reads the hyper block out of an unconstrained parameter vector.
GroupHyper hyper_from_theta(std::span<const double> theta);

/// Natural-scale parameters implied for run `run_index` by `theta`.
RWParams params_for_run(std::span<const double> theta, std::size_t run_index);

double joint_log_posterior(std::span<const double> theta, const FitDataset& data);

/// Same density for callers holding structured parameters (natural-scale
/// sigma > 0); agrees exactly with the flat-vector form, Jacobian included.
double joint_log_posterior(const GroupHyper& hyper, const LatentVector& latents,
                           const FitDataset& data);

/// Gradient of joint_log_posterior with respect to the unconstrained vector.
/// The learning-rate sensitivity of the value recursion is propagated by
/// forward accumulation: dV' = (r - V) + (1 - a) dV on the chosen arm.
/// Returns the log posterior; writes the gradient into `grad` (size = dim).
double joint_log_posterior_grad(std::span<const double> theta, const FitDataset& data,
                                std::span<double> grad);

/// Generates one run from the model: softmax choices against a seeded
/// Bernoulli environment, values updated online. Deterministic in
/// (params, structure, n_trials, seed).
FitRun simulate_run(const RWParams& params, const RewardStructure& structure,
                    int n_trials, std::uint64_t seed);

}  // namespace banditlab
