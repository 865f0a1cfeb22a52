#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rose/intrinsic.hpp"

namespace rose {

struct Ranking {
  MetricId metric_id = MetricId::rose;
  std::vector<std::string> order;  // best first
  std::map<std::string, double> scores;

  bool operator==(const Ranking&) const = default;
};

// Descending by value, ties broken by smaller generator_id.
Ranking rank_by_metric(std::span<const MetricScore> scores);

bool top1_match(const Ranking& proxy, const Ranking& oracle);
bool top3_match(const Ranking& proxy, const Ranking& oracle);

struct OracleEntry {
  double f1 = 0.0;
  std::vector<double> per_run;

  bool operator==(const OracleEntry&) const = default;
};

struct OracleTable {
  std::map<std::string, OracleEntry> entries;

  double best() const;
  Ranking ranking() const;

  bool operator==(const OracleTable&) const = default;
};

// (oracle[choice] - max oracle) in percentage points; always <= 0.
double performance_gap(const std::string& proxy_choice, const OracleTable& oracle);

struct Correlation {
  double r = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

// Sample Pearson r with a 95% Fisher-z interval (interval needs n > 3).
Correlation pearson(std::span<const double> x, std::span<const double> y);

// Tie-corrected Kendall tau-b.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct MannWhitney {
  double u = 0.0;  // U statistic of the first sample
  double p_two_sided = 1.0;
  bool exact = false;
};

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b);

// Seeded percentile (2.5 / 97.5) bootstrap interval of the mean.
std::pair<double, double> bootstrap_ci(std::span<const double> values, std::size_t n_resamples,
                                       std::uint64_t rng_seed);

double mean(std::span<const double> values);

// Midranks (1-based) of values.
std::vector<double> midranks(std::span<const double> values);

}  // namespace rose
