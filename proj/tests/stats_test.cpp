#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rose/hashing.hpp"
#include "rose/stats.hpp"

using namespace rose;

namespace {

using Vec = std::vector<double>;

double pair_tau_b(const Vec& x, const Vec& y) {
  double c = 0, d = 0, tx = 0, ty = 0, n0 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++n0;
      const double s = (x[i] - x[j]) * (y[i] - y[j]);
      if (s > 0) ++c;
      if (s < 0) ++d;
      if (x[i] == x[j]) ++tx;
      if (y[i] == y[j]) ++ty;
    }
  }
  return (c - d) / std::sqrt((n0 - tx) * (n0 - ty));
}

double direct_pearson(const Vec& x, const Vec& y) {
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// U of a: pairs (a_i, b_j) with a_i > b_j, ties counting half.
double direct_u(const Vec& a, const Vec& b) {
  double u = 0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

// Two-sided exact p: every way to pick |a| of the pooled values as "a".
double enumerate_p(const Vec& a, const Vec& b) {
  Vec pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size(), na = a.size();
  const double center = static_cast<double>(a.size() * b.size()) / 2.0;
  const double observed = std::abs(direct_u(a, b) - center);
  std::size_t extreme = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != na) continue;
    Vec x, y;
    for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1 ? x : y).push_back(pooled[i]);
    ++total;
    if (std::abs(direct_u(x, y) - center) >= observed - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

Ranking ranking_of(const std::vector<std::pair<std::string, double>>& v) {
  std::vector<MetricScore> s;
  for (const auto& [id, x] : v) s.push_back({MetricId::ttr, id, x, {}});
  return rank_by_metric(s);
}

}  // namespace

TEST(RankByMetric, Examples) {
  EXPECT_EQ(ranking_of({{"A", 0.2}, {"B", 0.9}}).order, (std::vector<std::string>{"B", "A"}));
  EXPECT_EQ(ranking_of({{"B", 0.5}, {"A", 0.5}}).order, (std::vector<std::string>{"A", "B"}));
  EXPECT_THROW(ranking_of({{"A", 0.5}, {"A", 0.1}}), Error);
  EXPECT_THROW(ranking_of({}), Error);
}

TEST(TopMatch, Examples) {
  auto r = [](std::vector<std::string> order) {
    Ranking k;
    k.order = std::move(order);
    return k;
  };
  EXPECT_TRUE(top1_match(r({"A", "B", "C"}), r({"A", "C", "B"})));
  EXPECT_TRUE(top3_match(r({"A", "B", "C"}), r({"A", "C", "B"})));
  EXPECT_FALSE(top1_match(r({"B", "A", "C", "D"}), r({"A", "B", "C", "D"})));
  EXPECT_TRUE(top3_match(r({"B", "A", "C", "D"}), r({"A", "B", "C", "D"})));
  EXPECT_FALSE(top3_match(r({"D", "A", "B", "C"}), r({"A", "B", "C", "D"})));
  EXPECT_THROW(top1_match(r({"A", "B", "D", "C"}), r({"A", "B", "C", "E"})), Error);
  EXPECT_THROW(top3_match(r({"A", "B"}), r({"A", "B"})), Error);
}

TEST(PerformanceGap, Examples) {
  OracleTable o;
  o.entries["A"].f1 = 0.90;
  o.entries["B"].f1 = 0.88;
  EXPECT_EQ(performance_gap("A", o), 0.0);
  EXPECT_NEAR(performance_gap("B", o), -2.0, 1e-12);
  EXPECT_THROW(performance_gap("C", o), Error);
  EXPECT_EQ(o.ranking().order, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(o.best(), 0.90);
}

TEST(Pearson, Examples) {
  EXPECT_NEAR(pearson(Vec{1, 2, 3}, Vec{2, 4, 6}).r, 1.0, 1e-15);
  EXPECT_NEAR(pearson(Vec{1, 2, 3}, Vec{-1, -2, -3}).r, -1.0, 1e-15);
  const auto c = pearson(Vec{1, 2, 3, 4}, Vec{1, 3, 2, 4});
  EXPECT_NEAR(c.r, 0.8, 1e-12);
  ASSERT_TRUE(c.ci_low && c.ci_high);
  // Fisher z with n = 4: atanh(0.8) +- 1.959964 / 1.
  EXPECT_NEAR(*c.ci_low, std::tanh(std::atanh(0.8) - 1.959963984540054), 1e-9);
  EXPECT_NEAR(*c.ci_high, std::tanh(std::atanh(0.8) + 1.959963984540054), 1e-9);
  EXPECT_FALSE(pearson(Vec{1, 2, 3}, Vec{1, 3, 2}).ci_low);
  EXPECT_THROW(pearson(Vec{1, 1, 1}, Vec{1, 2, 3}), Error);
  EXPECT_THROW(pearson(Vec{1, 2}, Vec{1, 2}), Error);
}

TEST(Pearson, MatchesDirectEvaluation) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    Vec x, y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(rng.uniform() * 10 - 5);
      y.push_back(rng.uniform() + 0.3 * x.back());
    }
    const double r = pearson(x, y).r;
    EXPECT_NEAR(r, direct_pearson(x, y), 1e-12);
    EXPECT_NEAR(pearson(y, x).r, r, 1e-15);
    Vec ax = x, ny = y;
    for (double& v : ax) v = 3.5 * v + 11;
    for (double& v : ny) v = -v;
    EXPECT_NEAR(pearson(ax, y).r, r, 1e-12);
    EXPECT_NEAR(pearson(x, ny).r, -r, 1e-12);
  }
}

TEST(KendallTauB, Examples) {
  EXPECT_EQ(kendall_tau_b(Vec{1, 2, 3, 4}, Vec{1, 2, 3, 4}), 1.0);
  EXPECT_EQ(kendall_tau_b(Vec{1, 2, 3, 4}, Vec{4, 3, 2, 1}), -1.0);
  EXPECT_NEAR(kendall_tau_b(Vec{1, 2, 3, 4}, Vec{2, 1, 3, 4}), 4.0 / 6.0, 1e-15);
  EXPECT_THROW(kendall_tau_b(Vec{1, 1, 1}, Vec{1, 2, 3}), Error);
  EXPECT_THROW(kendall_tau_b(Vec{1}, Vec{1}), Error);
}

TEST(KendallTauB, MatchesPairEnumeration) {
  for (std::size_t n : {4u, 5u}) {
    Vec base(n);
    std::iota(base.begin(), base.end(), 1.0);
    Vec p = base;
    do {
      EXPECT_NEAR(kendall_tau_b(base, p), pair_tau_b(base, p), 1e-15);
      Vec rev(p.rbegin(), p.rend());
      EXPECT_NEAR(kendall_tau_b(base, rev), -kendall_tau_b(base, p), 1e-15);
    } while (std::next_permutation(p.begin(), p.end()));
  }
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(12);
    Vec x, y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(static_cast<double>(rng.below(4)));
      y.push_back(static_cast<double>(rng.below(4)));
    }
    double ref = pair_tau_b(x, y);
    if (!std::isfinite(ref)) continue;
    const double t = kendall_tau_b(x, y);
    EXPECT_NEAR(t, ref, 1e-12);
    EXPECT_LE(std::abs(t), 1.0);
  }
}

TEST(MannWhitney, Examples) {
  const auto r = mann_whitney_u(Vec{1, 2, 3}, Vec{4, 5, 6});
  EXPECT_EQ(r.u, 0.0);
  EXPECT_NEAR(r.p_two_sided, 0.1, 1e-12);
  EXPECT_TRUE(r.exact);
  const auto same = mann_whitney_u(Vec{1, 2, 3, 4}, Vec{1, 2, 3, 4});
  EXPECT_EQ(same.u, 8.0);
  EXPECT_FALSE(same.exact);  // ties force the normal approximation
  EXPECT_THROW(mann_whitney_u(Vec{}, Vec{1}), Error);
}

TEST(MannWhitney, ExactMatchesEnumeration) {
  Rng rng(12);
  for (std::size_t na = 1; na < 10; ++na) {
    for (std::size_t nb = 1; na + nb <= 10; ++nb) {
      for (int trial = 0; trial < 3; ++trial) {
        Vec pool(na + nb);
        std::iota(pool.begin(), pool.end(), 1.0);
        rng.shuffle(pool);
        const Vec a(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(na));
        const Vec b(pool.begin() + static_cast<std::ptrdiff_t>(na), pool.end());
        const auto r = mann_whitney_u(a, b);
        ASSERT_TRUE(r.exact);
        EXPECT_EQ(r.u, direct_u(a, b));
        EXPECT_NEAR(r.p_two_sided, enumerate_p(a, b), 1e-12) << na << "," << nb;
        const auto s = mann_whitney_u(b, a);
        EXPECT_EQ(r.u + s.u, static_cast<double>(na * nb));
        EXPECT_NEAR(s.p_two_sided, r.p_two_sided, 1e-15);
      }
    }
  }
}

TEST(MannWhitney, LargeSamplesUseNormalApproximation) {
  Vec a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(i);
    b.push_back(i + 0.5);
  }
  const auto r = mann_whitney_u(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_EQ(r.u, direct_u(a, b));
  EXPECT_GT(r.p_two_sided, 0.0);
  EXPECT_LE(r.p_two_sided, 1.0);
}

TEST(Bootstrap, Properties) {
  const auto c = bootstrap_ci(Vec{2.5, 2.5, 2.5}, 500, 1);
  EXPECT_EQ(c.first, 2.5);
  EXPECT_EQ(c.second, 2.5);
  const Vec v{1, 4, 2, 8, 5, 7};
  EXPECT_EQ(bootstrap_ci(v, 500, 3), bootstrap_ci(v, 500, 3));
  const Vec sym{-3, -1, 0, 1, 3};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto [lo, hi] = bootstrap_ci(sym, 400, seed);
    EXPECT_LE(lo, 0.0);
    EXPECT_GE(hi, 0.0);
  }
  EXPECT_THROW(bootstrap_ci(Vec{1}, 100, 0), Error);
}

TEST(Midranks, Ties) {
  EXPECT_EQ(midranks(Vec{10, 20, 10, 30}), (Vec{1.5, 3, 1.5, 4}));
}

TEST(ArgmaxInvariance, IncreasingTransforms) {
  Rng rng(77);
  for (int r = 0; r < 20; ++r) {
    std::vector<std::pair<std::string, double>> a, b;
    for (int i = 0; i < 6; ++i) {
      a.push_back({"g" + std::to_string(i), rng.uniform()});
      b.push_back({"g" + std::to_string(i), rng.uniform()});
    }
    const bool t1 = top1_match(ranking_of(a), ranking_of(b));
    const bool t3 = top3_match(ranking_of(a), ranking_of(b));
    for (int t = 0; t < 20; ++t) {
      const double s = 0.1 + rng.uniform() * 5, off = rng.uniform() * 10 - 5;
      auto fa = a;
      for (auto& [id, v] : fa) v = std::exp(s * v) + off;
      EXPECT_EQ(top1_match(ranking_of(fa), ranking_of(b)), t1);
      EXPECT_EQ(top3_match(ranking_of(fa), ranking_of(b)), t3);
    }
  }
}
