#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "fabtip/errors.hpp"
#include "fabtip/stats.hpp"

using namespace fabtip;
using V = std::vector<double>;

TEST_CASE("mean and sample sd") {
  CHECK(stats::mean(V{0.9, 1.0}) == doctest::Approx(0.95));
  CHECK(stats::stddev(V{0.9, 1.0}) == doctest::Approx(0.0707107).epsilon(1e-5));
}

TEST_CASE("shapiro-wilk reference values") {
  // Reference values from an independent implementation of the same algorithm.
  struct Case {
    V x;
    double w, p;
  };
  const std::vector<Case> cases{
      {{148, 154, 158, 160, 161, 162, 166, 170, 182, 195, 236}, 0.7888146948631716, 0.006703814061898823},
      {{2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.0}, 0.9644133451535729, 0.8509326283658826},
      {{1, 2, 4}, 0.9642857142857142, 0.6368868450289689},
      {{2.041, -2.556, 0.418, -0.568, -0.453, -0.216, -2.02, -0.232, -0.865, 3.323, 0.226, -0.353, -0.281,
        -0.668, -1.055, -0.391, 0.482, -0.239, 0.958, -0.2, 0.024, 1.546, 0.545, -0.505, -0.183},
       0.9144677511185825, 0.038388444680705805},
  };
  for (const auto& c : cases) {
    auto r = stats::shapiro_wilk(c.x);
    CHECK(std::abs(r.statistic - c.w) < 1e-3);
    CHECK(std::abs(r.p_value - c.p) < 1e-3);
  }
}

TEST_CASE("shapiro-wilk invariances and errors") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    V x(5 + trial * 7);
    for (auto& v : x) v = n01(rng);
    V y = x;
    for (auto& v : y) v = 3.7 * v - 12.0;
    CHECK(std::abs(stats::shapiro_wilk(x).statistic - stats::shapiro_wilk(y).statistic) < 1e-9);
    auto r = stats::shapiro_wilk(x);
    CHECK(r.statistic > 0.0);
    CHECK(r.statistic <= 1.0);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }
  CHECK_THROWS_AS(stats::shapiro_wilk(V{1, 2}), DomainError);
  CHECK_THROWS_AS(stats::shapiro_wilk(V{3, 3, 3, 3}), DomainError);
  CHECK_THROWS_AS(stats::shapiro_wilk(V(5001, 1.0)), DomainError);
}

TEST_CASE("mann-whitney") {
  auto r = stats::mann_whitney_u(V{1, 2}, V{3, 4});
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0 / 3.0));

  auto same = stats::mann_whitney_u(V{1, 2, 3, 4}, V{1, 2, 3, 4});
  CHECK(same.p_value >= 0.99);

  // Reference value for the tie- and continuity-corrected normal approximation.
  V a{1.1, 2.3, 2.3, 4.0, 5.5, 6.1, 7.7}, b{3.3, 4.4, 5.5, 8.8, 9.9, 2.3, 10.1, 11.2, 6.6};
  auto big = stats::mann_whitney_u(a, b);
  CHECK(big.statistic == doctest::Approx(15.5));
  CHECK(big.p_value == doctest::Approx(0.0996075059267353).epsilon(1e-6));

  CHECK_THROWS_AS(stats::mann_whitney_u(V{}, V{1}), DomainError);
}

TEST_CASE("mann-whitney exact matches brute-force enumeration") {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> value(0, 6);
  for (int trial = 0; trial < 30; ++trial) {
    const int na = 1 + trial % 5, nb = 1 + (trial / 5) % 6;
    V a(na), b(nb);
    for (auto& v : a) v = value(rng);
    for (auto& v : b) v = value(rng);

    V all = a;
    all.insert(all.end(), b.begin(), b.end());
    const int n = na + nb;
    // Midranks of the pooled sample.
    V rank(n);
    for (int i = 0; i < n; ++i) {
      double less = 0, equal = 0;
      for (int j = 0; j < n; ++j) {
        less += all[j] < all[i];
        equal += all[j] == all[i];
      }
      rank[i] = less + (equal + 1) / 2.0;
    }
    auto u_of = [&](unsigned mask) {
      double s = 0;
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1u) s += rank[i];
      return s - na * (na + 1) / 2.0;
    };
    // Two-sided p is twice the smaller tail.
    const double observed = u_of((1u << na) - 1);
    double lower = 0, upper = 0, total = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (std::popcount(mask) != na) continue;
      ++total;
      const double u = u_of(mask);
      if (u <= observed + 1e-9) ++lower;
      if (u >= observed - 1e-9) ++upper;
    }
    auto r = stats::mann_whitney_u_exact(a, b);
    CHECK(r.statistic == doctest::Approx(observed));
    CHECK(r.p_value == doctest::Approx(std::min(1.0, 2 * std::min(lower, upper) / total)).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(stats::mann_whitney_u_exact(b, a).p_value).epsilon(1e-12));
  }
}

TEST_CASE("normal approximation tracks the exact test") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n01;
  for (int draw = 0; draw < 100; ++draw) {
    V a(6), b(6);
    const double shift = 0.15 * (draw % 10);
    for (auto& v : a) v = n01(rng);
    for (auto& v : b) v = n01(rng) + shift;
    const double exact = stats::mann_whitney_u_exact(a, b).p_value;
    const double approx = stats::mann_whitney_u_normal(a, b).p_value;
    CHECK(std::abs(exact - approx) < 0.03);
  }
}

TEST_CASE("one-sample t") {
  auto r = stats::one_sample_t(V{0.90, 0.95, 1.00}, 1.0 / 3.0);
  CHECK(r.statistic == doctest::Approx(21.36).epsilon(0.01 / 21.36));
  // Between the two-sided 0.01 (t = 9.925) and 0.002 (t = 22.327) critical values for 2 df.
  CHECK(r.p_value > 0.002);
  CHECK(r.p_value < 0.01);
  // With 2 df the two-sided p has the closed form 1 - t / sqrt(t^2 + 2).
  const double t = r.statistic;
  CHECK(r.p_value == doctest::Approx(1.0 - t / std::sqrt(t * t + 2.0)).epsilon(1e-9));

  auto zero = stats::one_sample_t(V{1, 2, 3}, 2.0);
  CHECK(zero.statistic == 0.0);
  CHECK(zero.p_value == doctest::Approx(1.0));
  CHECK_THROWS_AS(stats::one_sample_t(V{0.5, 0.5, 0.5}, 0.1), DomainError);
  CHECK_THROWS_AS(stats::one_sample_t(V{0.5}, 0.1), DomainError);
}
