#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace banditlab {

double logistic(double x);

/// log(logistic(x)), computed without overflow for any finite x.
double log_logistic(double x);

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal density.
double normal_pdf(double x);

/// Standard normal quantile (Wichura's AS241 PPND16), p in (0, 1).
double normal_quantile(double p);

/// log density of N(0, 1) at x.
double std_normal_logpdf(double x);

/// log density of half-Normal(0, scale) at x >= 0 (negative x -> -inf).
double half_normal_logpdf(double x, double scale);

double mean(std::span<const double> xs);

/// Sample standard deviation (n - 1 denominator); needs xs.size() >= 2.
double sample_sd(std::span<const double> xs);

/// Quantile by linear interpolation of order statistics on a sorted vector.
double quantile_sorted(std::span<const double> sorted, double p);

/// Convenience: copies, sorts, interpolates.
double quantile(std::vector<double> xs, double p);

struct MeanCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
};

/// mean +/- 1.96 * sd / sqrt(n) normal-approximation interval.
MeanCi normal_approx_ci(std::span<const double> xs);

}  // namespace banditlab
