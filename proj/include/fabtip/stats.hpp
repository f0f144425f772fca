#pragma once

#include <span>
#include <vector>

namespace fabtip::stats {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator).
double stddev(std::span<const double> x);

/// Two-sided Mann-Whitney U. The statistic is U for `a`. Exact over all rank
/// arrangements (midranks for ties) when |a| + |b| <= 12, otherwise the normal
/// approximation with tie and continuity corrections.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Exact two-sided Mann-Whitney p regardless of sample size.
TestResult mann_whitney_u_exact(std::span<const double> a, std::span<const double> b);
TestResult mann_whitney_u_normal(std::span<const double> a, std::span<const double> b);

/// One-sample Student t against `mu0`, two-sided.
TestResult one_sample_t(std::span<const double> x, double mu0);

/// Shapiro-Wilk W with Royston's (1995) coefficient and p-value
/// approximations, 3 <= n <= 5000.
TestResult shapiro_wilk(std::span<const double> x);

}  // namespace fabtip::stats
