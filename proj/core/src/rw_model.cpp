#include "banditlab/rw_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "banditlab/rng.hpp"
#include "banditlab/stats.hpp"

namespace banditlab {

namespace {

// Keeps Phi output strictly inside (0,1) where the CDF under/overflows, so
// the learning rate never reaches a closed endpoint.
double clamped_cdf(double u) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  const double p = normal_cdf(u);
  if (p < lo) return lo;
  if (p > hi) return hi;
  return p;
}

void check_run(const FitRun& run) {
  const std::size_t t = run.choices.size();
  if (run.rewards.size() != t || run.valid.size() != t) {
    throw std::invalid_argument("fit run: choices/rewards/valid lengths differ");
  }
}

constexpr double kSigmaPriorVar = 0.2 * 0.2;

}  // namespace

RWParams transform_params(const GroupHyper& hyper, double z_a, double z_tau) {
  RWParams p;
  p.learning_rate = clamped_cdf(hyper.mu_a + hyper.sigma_a * z_a);
  p.inverse_temperature = 5.0 * clamped_cdf(hyper.mu_tau + hyper.sigma_tau * z_tau);
  return p;
}

double run_loglik(const RWParams& params, const FitRun& run) {
  check_run(run);
  const double a = params.learning_rate;
  const double tau = params.inverse_temperature;
  double v[2] = {0.0, 0.0};
  double ll = 0.0;
  for (std::size_t t = 0; t < run.choices.size(); ++t) {
    if (!run.valid[t]) continue;
    const int c = run.choices[t] ? 1 : 0;
    const double diff = v[1] - v[0];
    ll += log_logistic(c ? tau * diff : -tau * diff);
    v[c] += a * (static_cast<double>(run.rewards[t]) - v[c]);
  }
  if (!std::isfinite(ll)) {
    throw std::runtime_error("run_loglik: non-finite log-likelihood");
  }
  return ll;
}

std::size_t param_dim(const FitDataset& data) { return 4 + 2 * data.runs.size(); }

std::vector<std::string> param_names(const FitDataset& data) {
  std::vector<std::string> names = {"mu_a", "log_sigma_a", "mu_tau", "log_sigma_tau"};
  names.reserve(param_dim(data));
  for (std::size_t i = 0; i < data.runs.size(); ++i) names.push_back("z_a[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < data.runs.size(); ++i) names.push_back("z_tau[" + std::to_string(i) + "]");
  return names;
}

GroupHyper hyper_from_theta(std::span<const double> theta) {
  if (theta.size() < 4) throw std::invalid_argument("theta: needs at least the 4 hyper coordinates");
  return {theta[0], std::exp(theta[1]), theta[2], std::exp(theta[3])};
}

RWParams params_for_run(std::span<const double> theta, std::size_t run_index) {
  const std::size_t n = (theta.size() - 4) / 2;
  if (theta.size() != 4 + 2 * n || run_index >= n) {
    throw std::invalid_argument("params_for_run: index outside theta layout");
  }
  const GroupHyper hyper = hyper_from_theta(theta);
  return transform_params(hyper, theta[4 + run_index], theta[4 + n + run_index]);
}

namespace {

double log_prior(std::span<const double> theta) {
  const double sigma_a = std::exp(theta[1]);
  const double sigma_tau = std::exp(theta[3]);
  // log-sigma parameterization: half-normal density on sigma plus the
  // Jacobian term log(sigma) per scale.
  return std_normal_logpdf(theta[0]) + std_normal_logpdf(theta[2]) +
         half_normal_logpdf(sigma_a, 0.2) + theta[1] +
         half_normal_logpdf(sigma_tau, 0.2) + theta[3];
}

}  // namespace

double joint_log_posterior(std::span<const double> theta, const FitDataset& data) {
  const std::size_t n = data.runs.size();
  if (theta.size() != 4 + 2 * n) {
    throw std::invalid_argument("joint_log_posterior: theta dimension mismatch");
  }
  const GroupHyper hyper = hyper_from_theta(theta);
  double lp = log_prior(theta);
  for (std::size_t i = 0; i < n; ++i) {
    const double z_a = theta[4 + i];
    const double z_tau = theta[4 + n + i];
    lp += std_normal_logpdf(z_a) + std_normal_logpdf(z_tau);
    lp += run_loglik(transform_params(hyper, z_a, z_tau), data.runs[i]);
  }
  return lp;
}

double joint_log_posterior(const GroupHyper& hyper, const LatentVector& latents,
                           const FitDataset& data) {
  const std::size_t n = data.runs.size();
  if (latents.z_a.size() != n || latents.z_tau.size() != n) {
    throw std::invalid_argument("joint_log_posterior: latent lengths must match run count");
  }
  if (!(hyper.sigma_a > 0.0) || !(hyper.sigma_tau > 0.0)) {
    throw std::invalid_argument("joint_log_posterior: sigmas must be positive");
  }
  std::vector<double> theta(4 + 2 * n);
  theta[0] = hyper.mu_a;
  theta[1] = std::log(hyper.sigma_a);
  theta[2] = hyper.mu_tau;
  theta[3] = std::log(hyper.sigma_tau);
  for (std::size_t i = 0; i < n; ++i) {
    theta[4 + i] = latents.z_a[i];
    theta[4 + n + i] = latents.z_tau[i];
  }
  return joint_log_posterior(theta, data);
}

double joint_log_posterior_grad(std::span<const double> theta, const FitDataset& data,
                                std::span<double> grad) {
  const std::size_t n = data.runs.size();
  const std::size_t dim = 4 + 2 * n;
  if (theta.size() != dim || grad.size() != dim) {
    throw std::invalid_argument("joint_log_posterior_grad: dimension mismatch");
  }
  const double mu_a = theta[0], mu_tau = theta[2];
  const double sigma_a = std::exp(theta[1]), sigma_tau = std::exp(theta[3]);

  double lp = log_prior(theta);
  grad[0] = -mu_a;
  grad[1] = 1.0 - sigma_a * sigma_a / kSigmaPriorVar;
  grad[2] = -mu_tau;
  grad[3] = 1.0 - sigma_tau * sigma_tau / kSigmaPriorVar;

  for (std::size_t i = 0; i < n; ++i) {
    const FitRun& run = data.runs[i];
    check_run(run);
    const double z_a = theta[4 + i];
    const double z_tau = theta[4 + n + i];
    lp += std_normal_logpdf(z_a) + std_normal_logpdf(z_tau);
    grad[4 + i] = -z_a;
    grad[4 + n + i] = -z_tau;

    const double u_a = mu_a + sigma_a * z_a;
    const double u_tau = mu_tau + sigma_tau * z_tau;
    const double a = clamped_cdf(u_a);
    const double tau = 5.0 * clamped_cdf(u_tau);

    // Forward pass: accumulate dll/da and dll/dtau alongside the
    // likelihood, propagating dV/da on the chosen arm.
    double v[2] = {0.0, 0.0};
    double dv[2] = {0.0, 0.0};
    double dll_da = 0.0, dll_dtau = 0.0;
    for (std::size_t t = 0; t < run.choices.size(); ++t) {
      if (!run.valid[t]) continue;
      const int c = run.choices[t] ? 1 : 0;
      const double diff = v[1] - v[0];
      const double ddiff = dv[1] - dv[0];
      const double p_y = logistic(tau * diff);
      if (c == 1) {
        lp += log_logistic(tau * diff);
        dll_dtau += (1.0 - p_y) * diff;
        dll_da += (1.0 - p_y) * tau * ddiff;
      } else {
        lp += log_logistic(-tau * diff);
        dll_dtau += -p_y * diff;
        dll_da += -p_y * tau * ddiff;
      }
      const double r = static_cast<double>(run.rewards[t]);
      dv[c] = (r - v[c]) + (1.0 - a) * dv[c];
      v[c] += a * (r - v[c]);
    }

    // Chain rule through the probit transforms; phi underflows exactly
    // where the CDF clamp binds, so the clamp needs no special casing.
    const double da_du = normal_pdf(u_a);
    const double dtau_du = 5.0 * normal_pdf(u_tau);
    grad[0] += dll_da * da_du;
    grad[1] += dll_da * da_du * sigma_a * z_a;
    grad[4 + i] += dll_da * da_du * sigma_a;
    grad[2] += dll_dtau * dtau_du;
    grad[3] += dll_dtau * dtau_du * sigma_tau * z_tau;
    grad[4 + n + i] += dll_dtau * dtau_du * sigma_tau;
  }
  if (!std::isfinite(lp)) {
    throw std::runtime_error("joint_log_posterior_grad: non-finite value");
  }
  return lp;
}

FitRun simulate_run(const RWParams& params, const RewardStructure& structure,
                    int n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw std::invalid_argument("simulate_run: need at least one trial");
  validate_structure(structure);
  Xoshiro256pp choice_rng(seed_combine(seed, "choice"));
  BanditEnv env(structure, seed_combine(seed, "env"));
  FitRun run;
  run.choices.resize(static_cast<std::size_t>(n_trials));
  run.rewards.resize(static_cast<std::size_t>(n_trials));
  run.valid.assign(static_cast<std::size_t>(n_trials), 1);
  const double a = params.learning_rate;
  const double tau = params.inverse_temperature;
  double v[2] = {0.0, 0.0};
  for (int t = 0; t < n_trials; ++t) {
    const double p_y = logistic(tau * (v[1] - v[0]));
    const int c = choice_rng.uniform() < p_y ? 1 : 0;
    const int r = env.draw_reward(c ? Choice::Y : Choice::X).reward;
    run.choices[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(c);
    run.rewards[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(r);
    v[c] += a * (static_cast<double>(r) - v[c]);
  }
  return run;
}

}  // namespace banditlab
