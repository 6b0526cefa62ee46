#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "banditlab/inference.hpp"
#include "banditlab/rng.hpp"

namespace banditlab {

std::vector<double> Chains::parameter(std::size_t param) const {
  std::vector<double> out;
  out.reserve(total_draws());
  for (std::size_t c = 0; c < n_chains; ++c) {
    for (std::size_t d = 0; d < n_draws; ++d) out.push_back(at(c, d, param));
  }
  return out;
}

double Chains::divergence_rate() const {
  if (n_chains == 0 || n_draws == 0) return 0.0;
  long long total = 0;
  for (int d : divergences) total += d;
  return static_cast<double>(total) / static_cast<double>(total_draws());
}

namespace {

constexpr double kDivergenceThreshold = 1000.0;

struct Gradient {
  double logp = 0.0;
  bool finite = false;
};

// Evaluates the target, treating any exception or non-finite result as an
// off-support point so the trajectory can be rejected rather than aborted.
Gradient eval(const LogDensity& model, const std::vector<double>& theta,
              std::vector<double>& grad) {
  Gradient g;
  try {
    g.logp = model.value_and_grad(theta, grad);
  } catch (const std::exception&) {
    return g;
  }
  if (!std::isfinite(g.logp)) return g;
  for (double v : grad) {
    if (!std::isfinite(v)) return g;
  }
  g.finite = true;
  return g;
}

double kinetic(const std::vector<double>& momentum, const std::vector<double>& inv_metric) {
  double k = 0.0;
  for (std::size_t i = 0; i < momentum.size(); ++i) {
    k += inv_metric[i] * momentum[i] * momentum[i];
  }
  return 0.5 * k;
}

// Dual-averaging controller for the step size (Hoffman & Gelman 2014
// constants: gamma 0.05, t0 10, kappa 0.75).
struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  double target = 0.8;
  int counter = 0;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = 0.0;
    h_bar = 0.0;
    counter = 0;
  }

  void update(double accept_prob) {
    ++counter;
    const double m = static_cast<double>(counter);
    const double eta = 1.0 / (m + 10.0);
    h_bar = (1.0 - eta) * h_bar + eta * (target - accept_prob);
    log_eps = mu - std::sqrt(m) / 0.05 * h_bar;
    const double weight = std::pow(m, -0.75);
    log_eps_bar = weight * log_eps + (1.0 - weight) * log_eps_bar;
  }

  double current() const { return std::exp(log_eps); }
  double adapted() const { return std::exp(log_eps_bar); }
};

// Running mean/variance for the diagonal metric windows.
struct Welford {
  std::vector<double> mean;
  std::vector<double> m2;
  long long n = 0;

  explicit Welford(std::size_t dim) : mean(dim, 0.0), m2(dim, 0.0) {}

  void add(const std::vector<double>& x) {
    ++n;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d / static_cast<double>(n);
      m2[i] += d * (x[i] - mean[i]);
    }
  }

  // Regularized variance estimate, shrunk toward unit scale exactly as the
  // shrinkage used by mainstream adaptive HMC implementations.
  std::vector<double> regularized() const {
    std::vector<double> v(mean.size(), 1.0);
    if (n < 2) return v;
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double var = m2[i] / (nn - 1.0);
      v[i] = nn / (nn + 5.0) * var + 1e-3 * (5.0 / (nn + 5.0));
    }
    return v;
  }
};

struct ChainResult {
  std::vector<double> draws;  // n_draws x dim
  int divergences = 0;
  double step_size = 0.0;
  double accept_rate = 0.0;
};

class ChainSampler {
 public:
  ChainSampler(const LogDensity& model, const SamplerConfig& config, std::uint64_t seed)
      : model_(model),
        config_(config),
        rng_(seed),
        dim_(model.dim()),
        theta_(dim_),
        grad_(dim_),
        inv_metric_(dim_, 1.0) {}

  ChainResult run() {
    initialize();
    warmup();
    return collect();
  }

 private:
  void initialize() {
    for (int attempt = 0; attempt < 10; ++attempt) {
      for (auto& t : theta_) t = -0.1 + 0.2 * rng_.uniform();
      const Gradient g = eval(model_, theta_, grad_);
      if (g.finite) {
        logp_ = g.logp;
        return;
      }
    }
    throw FitQualityError("no finite starting point after 10 jittered inits");
  }

  // One leapfrog trajectory from the current state; returns the proposal's
  // acceptance probability (0 when the trajectory leaves the support).
  struct Transition {
    double accept_prob = 0.0;
    bool divergent = false;
  };

  Transition transition(double eps) {
    std::vector<double> p(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      p[i] = rng_.normal() / std::sqrt(inv_metric_[i]);
    }
    const double h0 = -logp_ + kinetic(p, inv_metric_);

    std::vector<double> q = theta_;
    std::vector<double> grad = grad_;
    const int max_steps = std::max(1, config_.n_leapfrog);
    const int min_steps = std::max(1, max_steps / 2);
    const int n_steps =
        min_steps + static_cast<int>(rng_.below(static_cast<std::uint64_t>(max_steps - min_steps + 1)));

    bool ok = true;
    double logp_q = logp_;
    for (int s = 0; s < n_steps; ++s) {
      for (std::size_t i = 0; i < dim_; ++i) p[i] += 0.5 * eps * grad[i];
      for (std::size_t i = 0; i < dim_; ++i) q[i] += eps * inv_metric_[i] * p[i];
      const Gradient g = eval(model_, q, grad);
      if (!g.finite) {
        ok = false;
        break;
      }
      logp_q = g.logp;
      for (std::size_t i = 0; i < dim_; ++i) p[i] += 0.5 * eps * grad[i];
    }

    Transition t;
    if (!ok) {
      t.divergent = true;
      return t;
    }
    const double h1 = -logp_q + kinetic(p, inv_metric_);
    const double dh = h0 - h1;
    if (!std::isfinite(dh) || std::abs(dh) > kDivergenceThreshold) {
      t.divergent = true;
      return t;
    }
    t.accept_prob = std::min(1.0, std::exp(dh));
    if (std::log(rng_.uniform_oo()) < dh) {
      theta_ = q;
      grad_ = grad;
      logp_ = logp_q;
    }
    return t;
  }

  // Doubling/halving search for a step size whose one-step acceptance
  // straddles 0.5; seeds the dual-averaging start.
  double find_initial_step() {
    double eps = 1.0;
    std::vector<double> p(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      p[i] = rng_.normal() / std::sqrt(inv_metric_[i]);
    }
    const double h0 = -logp_ + kinetic(p, inv_metric_);

    const auto one_step_dh = [&](double step) {
      std::vector<double> q = theta_;
      std::vector<double> pp = p;
      std::vector<double> grad = grad_;
      for (std::size_t i = 0; i < dim_; ++i) pp[i] += 0.5 * step * grad[i];
      for (std::size_t i = 0; i < dim_; ++i) q[i] += step * inv_metric_[i] * pp[i];
      const Gradient g = eval(model_, q, grad);
      if (!g.finite) return -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < dim_; ++i) pp[i] += 0.5 * step * grad[i];
      return h0 - (-g.logp + kinetic(pp, inv_metric_));
    };

    double dh = one_step_dh(eps);
    const double direction = dh > std::log(0.5) ? 1.0 : -1.0;
    for (int i = 0; i < 50; ++i) {
      eps *= direction > 0 ? 2.0 : 0.5;
      dh = one_step_dh(eps);
      if (!std::isfinite(dh)) {
        if (direction > 0) {
          eps *= 0.5;
          break;
        }
        continue;
      }
      if ((direction > 0 && dh <= std::log(0.5)) || (direction < 0 && dh >= std::log(0.5))) break;
    }
    return std::clamp(eps, 1e-8, 1e2);
  }

  void warmup() {
    const int total = config_.n_warmup;
    if (total <= 0) {
      step_size_ = find_initial_step();
      return;
    }

    // Three-phase schedule: a fast head (step size only), doubling slow
    // windows feeding the metric, and a fast tail re-equilibrating the
    // step size against the final metric.
    int init_buffer = 75, term_buffer = 50, base_window = 25;
    if (total < init_buffer + term_buffer + base_window) {
      init_buffer = static_cast<int>(0.15 * total);
      term_buffer = static_cast<int>(0.10 * total);
      base_window = total - init_buffer - term_buffer;
    }

    DualAveraging da;
    da.target = config_.target_accept;
    step_size_ = find_initial_step();
    da.restart(step_size_);

    const int slow_end = total - term_buffer;
    int window_end = init_buffer + base_window;
    int window_size = base_window;
    Welford accum(dim_);

    for (int iter = 0; iter < total; ++iter) {
      const Transition t = transition(da.current());
      da.update(t.accept_prob);
      const bool slow_phase = iter >= init_buffer && iter < slow_end && base_window > 0;
      if (slow_phase) {
        accum.add(theta_);
        const int upcoming = iter + 1;
        if (upcoming == window_end) {
          inv_metric_ = accum.regularized();
          accum = Welford(dim_);
          window_size *= 2;
          window_end = upcoming + window_size;
          // The final window absorbs what a further doubling would split.
          if (window_end + 2 * window_size > slow_end) window_end = slow_end;
          if (window_end > slow_end) window_end = slow_end;
          const Gradient g = eval(model_, theta_, grad_);
          logp_ = g.logp;
          step_size_ = find_initial_step();
          da.restart(step_size_);
        }
      }
    }
    step_size_ = da.adapted();
  }

  ChainResult collect() {
    ChainResult result;
    result.step_size = step_size_;
    result.draws.reserve(static_cast<std::size_t>(config_.n_samples) * dim_);
    double accept_sum = 0.0;
    for (int i = 0; i < config_.n_samples; ++i) {
      const Transition t = transition(step_size_);
      if (t.divergent) ++result.divergences;
      accept_sum += t.accept_prob;
      result.draws.insert(result.draws.end(), theta_.begin(), theta_.end());
    }
    result.accept_rate = config_.n_samples > 0 ? accept_sum / config_.n_samples : 0.0;
    return result;
  }

  const LogDensity& model_;
  const SamplerConfig& config_;
  Xoshiro256pp rng_;
  std::size_t dim_;
  std::vector<double> theta_;
  std::vector<double> grad_;
  std::vector<double> inv_metric_;
  double logp_ = 0.0;
  double step_size_ = 1.0;
};

}  // namespace

Chains sample(const LogDensity& model, const SamplerConfig& config) {
  if (config.n_chains < 1) throw std::invalid_argument("sampler: n_chains must be >= 1");
  if (config.n_samples < 1) throw std::invalid_argument("sampler: n_samples must be >= 1");
  if (config.n_warmup < 0) throw std::invalid_argument("sampler: n_warmup must be >= 0");
  if (!(config.target_accept > 0.0 && config.target_accept < 1.0)) {
    throw std::invalid_argument("sampler: target_accept must lie in (0,1)");
  }

  Chains chains;
  chains.n_chains = static_cast<std::size_t>(config.n_chains);
  chains.n_draws = static_cast<std::size_t>(config.n_samples);
  chains.dim = model.dim();
  chains.names.reserve(chains.dim);
  for (std::size_t i = 0; i < chains.dim; ++i) chains.names.push_back("theta[" + std::to_string(i) + "]");
  chains.draws.reserve(chains.total_draws() * chains.dim);

  for (int c = 0; c < config.n_chains; ++c) {
    const std::uint64_t chain_seed =
        seed_combine(seed_combine(config.master_seed, "chain"), static_cast<std::uint64_t>(c));
    ChainSampler sampler(model, config, chain_seed);
    ChainResult result = sampler.run();
    chains.draws.insert(chains.draws.end(), result.draws.begin(), result.draws.end());
    chains.divergences.push_back(result.divergences);
    chains.step_sizes.push_back(result.step_size);
    chains.accept_rates.push_back(result.accept_rate);
  }

  if (chains.divergence_rate() > 0.10) {
    throw FitQualityError("divergence rate " + std::to_string(chains.divergence_rate()) +
                          " exceeds the 10% fit-quality bound");
  }
  return chains;
}

}  // namespace banditlab
