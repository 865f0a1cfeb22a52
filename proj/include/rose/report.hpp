#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rose/corpus.hpp"
#include "rose/intrinsic.hpp"
#include "rose/rose.hpp"
#include "rose/stats.hpp"

namespace rose {

struct MatchResult {
  MetricId metric_id = MetricId::rose;
  bool top1 = false;
  std::optional<bool> top3;  // absent with fewer than 3 candidates

  bool operator==(const MatchResult&) const = default;
};

struct GapResult {
  MetricId metric_id = MetricId::rose;
  std::string choice;
  double gap = 0.0;                // percentage points, <= 0
  std::vector<double> per_run;     // gap of each run's choice

  bool operator==(const GapResult&) const = default;
};

struct CorrelationResult {
  MetricId metric_id = MetricId::rose;
  std::optional<double> pearson_r;  // absent when undefined (n < 3, constant input)
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> kendall_tau_b;

  bool operator==(const CorrelationResult&) const = default;
};

struct SignificanceResult {
  MetricId metric_id = MetricId::rose;
  double u = 0.0;
  double p_two_sided = 1.0;
  bool exact = false;

  bool operator==(const SignificanceResult&) const = default;
};

struct RunReport {
  std::string manifest_hash;
  std::string task;
  std::string language;
  std::string generation_setup;
  std::size_t n_runs = 0;
  std::vector<MetricId> metrics;  // canonical order
  std::vector<CandidateGenerator> candidates;  // sorted by id
  std::vector<MetricScore> metric_scores;      // metric order, then candidate order
  std::vector<Ranking> rankings;               // metric order
  std::vector<RoseCell> rose_cells;            // trained_on, run, evaluated_on
  std::optional<OracleTable> oracle;
  std::vector<MatchResult> matches;
  std::vector<GapResult> gaps;
  std::vector<CorrelationResult> correlations;
  std::vector<SignificanceResult> significance;
  std::map<std::string, std::string> provenance;

  bool oracle_absent() const { return !oracle.has_value(); }
  std::string run_id() const { return manifest_hash.substr(0, 12); }

  bool operator==(const RunReport&) const = default;
};

struct ReportInputs {
  std::string manifest_hash;
  std::string task;
  std::string language;
  std::string generation_setup;
  std::size_t n_runs = 0;
  std::vector<MetricId> metrics;
  std::vector<CandidateGenerator> candidates;
  std::vector<MetricScore> metric_scores;
  std::vector<RoseCell> rose_cells;
  std::optional<OracleTable> oracle;
  std::map<std::string, std::string> provenance;
};

// Each run's choice under a metric: argmax of per_run_values[r] when the
// metric has per-run values, otherwise the overall argmax (ties to the smaller
// id in both cases).
std::vector<std::string> per_run_choices(std::span<const MetricScore> scores, std::size_t n_runs);

// Rankings for every metric; with an oracle also matches, gaps, correlations
// (Pearson with Fisher-z interval, Kendall tau-b) and the Mann-Whitney test of
// each metric's per-run gaps against the random baseline's per-run gaps.
// Throws Error when candidate sets disagree or a metric lacks scores.
RunReport assemble_report(ReportInputs inputs);

enum class ReportFormat { json_lines, csv_tables, markdown_tables };

std::string_view to_string(ReportFormat f);
ReportFormat report_format_from_string(std::string_view s);

// Canonical lossless form: one JSON object per line, each tagged by "kind".
std::string report_to_jsonl(const RunReport& report);
RunReport report_from_jsonl(std::istream& in);
RunReport load_report(const std::filesystem::path& path);

// Table name -> file contents for the given format. json-lines yields a single
// "report" table.
std::map<std::string, std::string> render_report(const RunReport& report, ReportFormat format);

// Writes <out_dir>/<run_id>/<table>.<ext>; returns the run directory.
std::filesystem::path write_report(const RunReport& report, const std::filesystem::path& out_dir,
                                   ReportFormat format);

// Cross-case summaries over several reports.
struct AggregateRow {
  MetricId metric_id = MetricId::rose;
  std::size_t n_cases = 0;        // reports that carry an oracle and this metric
  std::size_t top1_count = 0;
  std::size_t top3_count = 0;
  std::size_t top3_cases = 0;     // cases with >= 3 candidates
  double mean_gap = 0.0;
  std::map<std::string, double> mean_gap_by_task;
  std::map<std::string, double> mean_gap_by_language;
  // Per-case correlations averaged, with a bootstrap interval of that mean.
  std::optional<double> mean_pearson;
  std::optional<double> mean_pearson_low;
  std::optional<double> mean_pearson_high;
  std::optional<double> mean_kendall;
  // Correlation over all (metric value, oracle F1) points pooled across cases.
  std::optional<double> pooled_pearson;
  // Case-level gaps against the random baseline's case-level gaps.
  std::optional<SignificanceResult> vs_random;
};

struct Aggregate {
  std::size_t n_reports = 0;
  std::vector<std::string> tasks;
  std::vector<std::string> languages;
  std::vector<AggregateRow> rows;  // canonical metric order
};

Aggregate aggregate_reports(std::span<const RunReport> reports, std::size_t bootstrap_resamples,
                            std::uint64_t rng_seed);

std::map<std::string, std::string> render_aggregate(const Aggregate& agg, ReportFormat format);

// Deterministic number formatting used in csv and markdown tables.
std::string format_number(double v);

}  // namespace rose
