#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "p2pbench/rng.hpp"
#include "p2pbench/stats.hpp"

using namespace p2pbench;

TEST_CASE("five positive differences give the one-sided floor of 1/32") {
  const auto r = wilcoxon_signed_rank({0.3, 0.1, 0.25, 0.4, 0.05});
  CHECK(r.w_plus == doctest::Approx(15.0));
  CHECK(r.p_one_sided == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
  CHECK(r.n_used == 5);
  CHECK(r.n_zeros == 0);
}

TEST_CASE("negating every difference mirrors the one-sided p") {
  const std::vector<double> d = {0.3, -0.1, 0.25, 0.4, 0.05};
  const auto pos = wilcoxon_signed_rank(d);
  std::vector<double> neg;
  for (double v : d) neg.push_back(-v);
  const auto mirrored = wilcoxon_signed_rank(neg);
  // W+ maps to n(n+1)/2 - W+.
  CHECK(mirrored.w_plus == doctest::Approx(15.0 - pos.w_plus));
  // P(W >= w) + P(W >= n(n+1)/2 - w + 1) = 1 by symmetry; spot-check both
  // tails sum correctly through the two-sided value.
  CHECK(pos.p_two_sided == doctest::Approx(mirrored.p_two_sided).epsilon(1e-12));
}

TEST_CASE("zero differences are excluded before ranking") {
  const auto r = wilcoxon_signed_rank({0.3, 0.0, 0.1, 0.25, 0.4});
  CHECK(r.n_used == 4);
  CHECK(r.n_zeros == 1);
  CHECK(r.p_one_sided == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
  CHECK_THROWS_AS(wilcoxon_signed_rank({0.0, 0.0}), ValidationError);
}

TEST_CASE("exact p matches a monte-carlo sign-flip oracle") {
  Rng rng(17, "wilcoxon-mc");
  const std::vector<double> diffs = {0.8, -0.2, 0.5, 0.5, -0.9, 0.1, 0.3};
  const auto exact = wilcoxon_signed_rank(diffs);

  // Oracle: midranks of |d|, then random sign assignment.
  const std::size_t n = diffs.size();
  std::vector<double> absd(n);
  for (std::size_t i = 0; i < n; ++i) absd[i] = std::abs(diffs[i]);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return absd[a] < absd[b]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && absd[order[j]] == absd[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
    i = j;
  }
  const std::size_t trials = 100000;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    double w = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (rng.bernoulli(0.5)) w += rank[k];
    }
    if (w >= exact.w_plus) ++hits;
  }
  const double mc = static_cast<double>(hits) / static_cast<double>(trials);
  const double sigma =
      std::sqrt(exact.p_one_sided * (1.0 - exact.p_one_sided) /
                static_cast<double>(trials));
  CHECK(std::abs(mc - exact.p_one_sided) < 3.0 * sigma + 1e-12);
}

TEST_CASE("holm step-down reproduces the worked example") {
  const auto adj = holm_correct({0.01, 0.02, 0.03}, 3);
  CHECK(adj[0] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(adj[1] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(adj[2] == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("holm handles single values and clamps at one") {
  CHECK(holm_correct({0.02}, 5)[0] == doctest::Approx(0.1).epsilon(1e-12));
  const auto all_one = holm_correct({1.0, 1.0, 1.0}, 3);
  for (double p : all_one) CHECK(p == 1.0);
}

TEST_CASE("holm adjustments dominate raw p and are monotone in sort order") {
  Rng rng(18, "holm");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p;
    for (int i = 0; i < 8; ++i) p.push_back(rng.next_double());
    const auto adj = holm_correct(p, p.size());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(adj[i] >= p[i]);
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      CHECK(adj[order[i]] >= adj[order[i - 1]]);
    }
  }
}

TEST_CASE("cliffs delta matches pair enumeration and labels magnitudes") {
  const auto total = cliffs_delta({1, 2, 3}, {0, 0, 0});
  CHECK(total.delta == doctest::Approx(1.0));
  CHECK(total.magnitude == "large");

  const auto equal = cliffs_delta({1, 2, 3}, {1, 2, 3});
  CHECK(equal.delta == doctest::Approx(0.0));
  CHECK(equal.magnitude == "negligible");

  const auto mixed = cliffs_delta({1, 2}, {1, 3});
  CHECK(mixed.delta == doctest::Approx(-0.25));
  CHECK(mixed.magnitude == "small");
}

TEST_CASE("cliffs delta is antisymmetric") {
  Rng rng(19, "cliffs");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a, b;
    for (int i = 0; i < 9; ++i) a.push_back(rng.uniform(-2, 2));
    for (int i = 0; i < 7; ++i) b.push_back(rng.uniform(-2, 2));
    CHECK(cliffs_delta(a, b).delta ==
          doctest::Approx(-cliffs_delta(b, a).delta).epsilon(1e-12));
  }
}

TEST_CASE("magnitude thresholds sit at the documented cut points") {
  CHECK(cliffs_magnitude(0.10) == "negligible");
  CHECK(cliffs_magnitude(0.20) == "small");
  CHECK(cliffs_magnitude(0.40) == "medium");
  CHECK(cliffs_magnitude(0.60) == "large");
}
