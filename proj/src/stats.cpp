#include "fabtip/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "fabtip/errors.hpp"

namespace fabtip::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw DomainError("mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  if (x.size() < 2) throw DomainError("standard deviation needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

namespace {

// Midranks of the pooled sample, doubled so ties stay integral.
std::vector<long> doubled_ranks(std::span<const double> pooled) {
  const auto n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return pooled[i] < pooled[j]; });
  std::vector<long> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const long twice_mid = static_cast<long>(i + 1 + j + 1);  // 2 * (i+1 + j+1) / 2
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = twice_mid;
    i = j + 1;
  }
  return ranks;
}

void require_samples(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("Mann-Whitney needs two non-empty samples");
}

}  // namespace

TestResult mann_whitney_u_exact(std::span<const double> a, std::span<const double> b) {
  require_samples(a, b);
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = doubled_ranks(pooled);
  const std::size_t na = a.size(), n = pooled.size();

  const long observed = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(na), 0L);
  const long max_sum = std::accumulate(ranks.begin(), ranks.end(), 0L);

  // ways[k][s]: subsets of size k whose doubled-rank sum is s.
  std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = std::min(i + 1, na); k >= 1; --k) {
      for (long s = max_sum; s >= ranks[i]; --s) ways[k][s] += ways[k - 1][s - ranks[i]];
    }
  }
  double total = 0.0, le = 0.0, ge = 0.0;
  for (long s = 0; s <= max_sum; ++s) {
    const double w = ways[na][s];
    total += w;
    if (s <= observed) le += w;
    if (s >= observed) ge += w;
  }
  const double offset = static_cast<double>(na * (na + 1)) / 2.0;
  return {static_cast<double>(observed) / 2.0 - offset, std::min(1.0, 2.0 * std::min(le, ge) / total)};
}

TestResult mann_whitney_u_normal(std::span<const double> a, std::span<const double> b) {
  require_samples(a, b);
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = doubled_ranks(pooled);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size()), n = na + nb;
  const double rank_sum = std::accumulate(ranks.begin(), ranks.begin() + static_cast<long>(a.size()), 0L) / 2.0;
  const double u = rank_sum - na * (na + 1) / 2.0;

  // Tie correction: sum over tie groups of t^3 - t.
  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  const double mu = na * nb / 2.0;
  const double var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (!(var > 0.0)) return {u, 1.0};
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  return {u, std::min(1.0, std::erfc(z / std::sqrt(2.0)))};
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  return a.size() + b.size() <= 12 ? mann_whitney_u_exact(a, b) : mann_whitney_u_normal(a, b);
}

TestResult one_sample_t(std::span<const double> x, double mu0) {
  if (x.size() < 2) throw DomainError("t-test needs at least two observations");
  const double sd = stddev(x);
  if (!(sd > 0.0)) throw DomainError("t-test sample has zero variance");
  const double n = static_cast<double>(x.size());
  const double t = (mean(x) - mu0) / (sd / std::sqrt(n));
  boost::math::students_t dist(n - 1.0);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return {t, std::min(1.0, p)};
}

namespace {

double poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
  return r;
}

}  // namespace

TestResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000) throw DomainError("Shapiro-Wilk needs 3 <= n <= 5000");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (!(x.back() - x.front() > 0.0)) throw DomainError("Shapiro-Wilk sample has zero range");

  const boost::math::normal std_normal;
  const double an = static_cast<double>(n);
  const std::size_t half = n / 2;

  // Coefficients for the upper half, a[0] pairs the extremes.
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = boost::math::quantile(std_normal, (static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first_plain = 1;
    double fac = 0.0;
    if (n > 5) {
      const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
      first_plain = 2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first_plain; i < half; ++i) a[i] = -m[i] / fac;
  }

  const double xm = mean(x);
  double ssq = 0.0;
  for (double v : x) ssq += (v - xm) * (v - xm);
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  const double w = std::min(1.0, num * num / ssq);

  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;  // 6 / pi
    constexpr double stqr = 1.04719755119660;  // asin(sqrt(3/4))
    return {w, std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr))};
  }

  double y = std::log(1.0 - w);
  double mu = 0.0, sigma = 0.0;
  if (n <= 11) {
    static constexpr double g[] = {-2.273, 0.459};
    static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
    static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
    const double gamma = poly(g, an);
    if (y >= gamma) return {w, 1e-99};
    y = -std::log(gamma - y);
    mu = poly(c3, an);
    sigma = std::exp(poly(c4, an));
  } else {
    static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
    const double ln_n = std::log(an);
    mu = poly(c5, ln_n);
    sigma = std::exp(poly(c6, ln_n));
  }
  const double p = boost::math::cdf(boost::math::complement(boost::math::normal(mu, sigma), y));
  return {w, p};
}

}  // namespace fabtip::stats
