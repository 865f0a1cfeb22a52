#include "rose/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "rose/hashing.hpp"

namespace rose {

Ranking rank_by_metric(std::span<const MetricScore> scores) {
  if (scores.empty()) throw Error("rank_by_metric: no scores");
  Ranking ranking;
  ranking.metric_id = scores[0].metric_id;
  for (const auto& s : scores) {
    if (!std::isfinite(s.value)) {
      throw Error("rank_by_metric: non-finite value for '" + s.generator_id + "'");
    }
    if (!ranking.scores.emplace(s.generator_id, s.value).second) {
      throw Error("rank_by_metric: duplicate generator '" + s.generator_id + "'");
    }
    ranking.order.push_back(s.generator_id);
  }
  std::sort(ranking.order.begin(), ranking.order.end(),
            [&](const std::string& a, const std::string& b) {
              const double va = ranking.scores.at(a), vb = ranking.scores.at(b);
              if (va != vb) return va > vb;
              return a < b;
            });
  return ranking;
}

namespace {

void check_same_candidates(const Ranking& proxy, const Ranking& oracle) {
  std::set<std::string> a(proxy.order.begin(), proxy.order.end());
  std::set<std::string> b(oracle.order.begin(), oracle.order.end());
  if (a != b) throw Error("ranking comparison: candidate sets differ");
}

}  // namespace

bool top1_match(const Ranking& proxy, const Ranking& oracle) {
  check_same_candidates(proxy, oracle);
  if (proxy.order.empty()) throw Error("top1_match: empty ranking");
  return proxy.order.front() == oracle.order.front();
}

bool top3_match(const Ranking& proxy, const Ranking& oracle) {
  check_same_candidates(proxy, oracle);
  if (proxy.order.size() < 3) throw Error("top3_match: needs at least 3 candidates");
  std::set<std::string> a(proxy.order.begin(), proxy.order.begin() + 3);
  std::set<std::string> b(oracle.order.begin(), oracle.order.begin() + 3);
  return a == b;
}

double OracleTable::best() const {
  if (entries.empty()) throw Error("oracle table is empty");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& [id, e] : entries) m = std::max(m, e.f1);
  return m;
}

Ranking OracleTable::ranking() const {
  std::vector<MetricScore> scores;
  for (const auto& [id, e] : entries) scores.push_back({MetricId::rose, id, e.f1, {}});
  return rank_by_metric(scores);
}

double performance_gap(const std::string& proxy_choice, const OracleTable& oracle) {
  auto it = oracle.entries.find(proxy_choice);
  if (it == oracle.entries.end()) {
    throw Error("performance_gap: '" + proxy_choice + "' missing from oracle table");
  }
  return (it->second.f1 - oracle.best()) * 100.0;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error("mean of empty list");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("pearson: length mismatch");
  if (x.size() < 3) throw Error("pearson: needs at least 3 points");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("pearson: constant input");
  Correlation c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const std::size_t n = x.size();
  if (n > 3) {
    if (std::abs(c.r) == 1.0) {
      c.ci_low = c.ci_high = c.r;
    } else {
      constexpr double kZ975 = 1.959963984540054;
      const double z = std::atanh(c.r);
      const double se = 1.0 / std::sqrt(static_cast<double>(n - 3));
      c.ci_low = std::tanh(z - kZ975 * se);
      c.ci_high = std::tanh(z + kZ975 * se);
    }
  }
  return c;
}

namespace {

// Merge sort counting inversions (strictly decreasing pairs).
std::int64_t sort_count_swaps(std::vector<double>& v, std::size_t lo, std::size_t hi,
                              std::vector<double>& tmp) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = sort_count_swaps(v, lo, mid, tmp) + sort_count_swaps(v, mid, hi, tmp);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo),
            tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq eq) {
  std::int64_t total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && eq(i - 1, i)) {
      ++run;
    } else {
      total += static_cast<std::int64_t>(run * (run - 1) / 2);
      run = 1;
    }
  }
  return total;
}

}  // namespace

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("kendall_tau_b: length mismatch");
  if (x.size() < 2) throw Error("kendall_tau_b: needs at least 2 points");
  const std::size_t n = x.size();

  // Knight's O(n log n) algorithm: sort by (x, y), count x-ties and joint
  // ties, then count discordant pairs as merge-sort inversions in y.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });
  const std::int64_t n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
  const std::int64_t n1 = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return x[idx[i]] == x[idx[j]];
  });
  const std::int64_t n3 = tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return x[idx[i]] == x[idx[j]] && y[idx[i]] == y[idx[j]];
  });
  std::vector<double> ys(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const std::int64_t swaps = sort_count_swaps(ys, 0, n, tmp);
  const std::int64_t n2 = tied_pairs(n, [&](std::size_t i, std::size_t j) { return ys[i] == ys[j]; });

  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  if (denom == 0.0) throw Error("kendall_tau_b: all values tied on one side");
  const double numer = static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
  return std::clamp(numer / denom, -1.0, 1.0);
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Number of rank assignments giving each U for sample sizes (m, n), by the
// recurrence f(m, n, u) = f(m - 1, n, u - n) + f(m, n - 1, u).
std::vector<double> u_distribution(std::size_t m, std::size_t n) {
  // table[i][j] is the count vector for sizes (i, j).
  std::vector<std::vector<std::vector<double>>> table(
      m + 1, std::vector<std::vector<double>>(n + 1));
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      auto& f = table[i][j];
      f.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        f[0] = 1.0;
        continue;
      }
      const auto& drop_a = table[i - 1][j];
      const auto& drop_b = table[i][j - 1];
      for (std::size_t u = 0; u < drop_b.size(); ++u) f[u] += drop_b[u];
      for (std::size_t u = 0; u < drop_a.size(); ++u) f[u + j] += drop_a[u];
    }
  }
  return table[m][n];
}

}  // namespace

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error("mann_whitney_u: empty sample");
  const std::size_t m = a.size(), n = b.size(), total = m + n;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < m; ++i) rank_sum_a += ranks[i];

  MannWhitney out;
  out.u = rank_sum_a - static_cast<double>(m * (m + 1)) / 2.0;

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  const bool ties = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();

  if (total <= 12 && !ties) {
    const auto dist = u_distribution(m, n);
    const double all = std::accumulate(dist.begin(), dist.end(), 0.0);
    const auto u = static_cast<std::size_t>(std::llround(out.u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      if (k <= u) lower += dist[k];
      if (k >= u) upper += dist[k];
    }
    out.p_two_sided = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    out.exact = true;
    return out;
  }

  // Normal approximation with tie and continuity corrections.
  double tie_term = 0.0;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j + 1 < total && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double dm = static_cast<double>(m), dn = static_cast<double>(n),
               dt = static_cast<double>(total);
  const double mu = dm * dn / 2.0;
  const double var = dm * dn / 12.0 * ((dt + 1.0) - tie_term / (dt * (dt - 1.0)));
  if (var <= 0.0) {
    out.p_two_sided = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.u - mu) - 0.5) / std::sqrt(var);
  out.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

std::pair<double, double> bootstrap_ci(std::span<const double> values, std::size_t n_resamples,
                                       std::uint64_t rng_seed) {
  if (values.size() < 2) throw Error("bootstrap_ci: needs at least 2 values");
  if (n_resamples == 0) throw Error("bootstrap_ci: n_resamples must be positive");
  std::vector<double> means(n_resamples);
  for (std::size_t i = 0; i < n_resamples; ++i) {
    Rng rng(SeedBuilder(rng_seed).add("bootstrap").add(i).seed());
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) s += values[rng.below(values.size())];
    means[i] = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  // Linear interpolation between order statistics.
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (h - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  return {quantile(0.025), quantile(0.975)};
}

}  // namespace rose
