#pragma once

#include <cstdint>

namespace prs {

/// Natural log of the gamma function for x > 0.
double log_gamma(double x);

/// Standard normal CDF.
double normal_cdf(double z);

/// Inverse standard normal CDF (Wichura's AS241, PPND16). Throws for q outside (0, 1).
double normal_quantile(double q);

/// Regularized incomplete beta I_x(a, b), evaluated by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

/// Quantile of Beta(a, b) at level q, by bisection on incomplete_beta.
double beta_quantile(double q, double a, double b);

/// One-sided Clopper-Pearson lower confidence bound on a binomial proportion:
/// the alpha-quantile of Beta(k, n - k + 1), and 0 when k = 0.
double clopper_pearson_lower(std::int64_t k, std::int64_t n, double alpha);

/// One-sided Clopper-Pearson upper bound: the (1 - alpha)-quantile of Beta(k + 1, n - k).
double clopper_pearson_upper(std::int64_t k, std::int64_t n, double alpha);

/// P(X >= k) for X ~ Binomial(n, prob).
double binomial_upper_tail(std::int64_t k, std::int64_t n, double prob);

/// Two-sided exact binomial test of H0: prob = 1/2, given k successes in n trials.
double binomial_test_two_sided(std::int64_t k, std::int64_t n);

}  // namespace prs
