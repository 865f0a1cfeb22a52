#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rose/manifest.hpp"
#include "rose/report.hpp"
#include "rose/rose.hpp"
#include "rose/simgen.hpp"

namespace rose {

// Everything one selection case needs, loaded and preprocessed.
struct CaseData {
  std::string task = "task";
  std::string language = "und";
  std::string generation_setup = "unspecified";
  LabelSet labels;
  std::vector<CandidateGenerator> candidates;  // sorted by id
  std::map<std::string, Dataset> raw;          // as loaded (train and test joined), before balancing
  DatasetMap splits;                           // balanced synthetic train/test
  std::map<std::string, EmbeddingTable> embeddings;  // over the balanced train + test samples
  std::optional<Dataset> human_test;
  bool pretokenized = false;  // any record carried a "tokens" field
};

struct EvalOptions {
  std::vector<MetricId> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  std::size_t n_runs = 10;
  TrainConfig train;
  std::optional<std::size_t> cross_subset_size;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  SilhouetteDistance silhouette_distance = SilhouetteDistance::cosine;
};

struct CaseEvaluation {
  // Deterministic per-candidate metrics (everything except rose and
  // random_baseline) for all candidates.
  std::vector<MetricScore> fixed_scores;
  std::map<std::string, ValidSource> valid_source;
  // Present when rose is enabled or human test data exists. Its extra set
  // "oracle" holds the per-run models' F1 on the human test data.
  std::optional<CrossEvaluation> cross;
};

// Thrown by pipeline stages; the message is prefixed with "[stage] ".
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& message)
      : Error("[" + stage + "] " + message), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Loads, balances, splits and embeds every dataset named by the manifest.
CaseData prepare_case(const Manifest& manifest, std::uint64_t master_seed);

// In-memory route for generated fixtures: the family's splits are used as
// given (already balanced), embeddings use the builtin provider.
CaseData case_from_family(const CandidateFamily& family, std::span<const CandidateGenerator> candidates,
                          std::optional<Dataset> human_test, std::uint32_t embedding_dim = 256);

CaseEvaluation evaluate_case(const CaseData& data, const EvalOptions& options);

// Report for a subset of the case's candidates (all of them when empty),
// reusing the case evaluation.
RunReport report_for_subset(const CaseData& data, const CaseEvaluation& eval, const EvalOptions& options,
                            std::span<const std::string> subset, const std::string& manifest_hash);

// Content hash of the effective configuration and every referenced input file.
std::string manifest_hash(const Manifest& manifest);

struct SweepRow {
  std::size_t size = 0;  // m (subset mode) or k (k mode)
  std::string subset;    // member ids joined by '+'
  MetricId metric_id = MetricId::rose;
  std::string choice;
  double gap = 0.0;
  bool top1 = false;
};

struct SweepSummary {
  std::size_t size = 0;
  MetricId metric_id = MetricId::rose;
  double mean_gap = 0.0;
  double top1_rate = 0.0;
  std::size_t n_runs = 0;
};

struct SweepResult {
  std::string mode;  // "subsets" or "k"
  std::size_t n_subset_runs = 0;
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summary;
  // RoSE result per subset run (subset mode) or per k (k mode), in row order.
  std::vector<RoseResult> rose_results;
};

// All subsets of size m_min..m_max (lexicographic over sorted ids).
SweepResult sweep_subsets(const CaseData& data, const CaseEvaluation& eval, const EvalOptions& options,
                          std::size_t m_min, std::size_t m_max);
// RoSE with each k-subset size over the full candidate set.
SweepResult sweep_k(const CaseData& data, const CaseEvaluation& eval, const EvalOptions& options,
                    std::span<const std::size_t> k_values);

std::map<std::string, std::string> render_sweep(const SweepResult& sweep, ReportFormat format);

// Command entry points. Return the process exit code: 0 success,
// 1 validation failure, 2 runtime failure. Diagnostics go to `err`.
struct RunOptions {
  std::filesystem::path manifest;
  std::optional<std::vector<MetricId>> metrics;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::optional<std::filesystem::path> out;
  ReportFormat format = ReportFormat::json_lines;
};

struct SweepOptions {
  std::string mode = "subsets";
  std::size_t m_min = 2;
  std::optional<std::size_t> m_max;
  std::vector<std::size_t> k_values;
};

int cmd_validate(const std::filesystem::path& manifest, std::ostream& out, std::ostream& err);
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunOptions& options, const SweepOptions& sweep, std::ostream& out, std::ostream& err);
int cmd_aggregate(std::span<const std::filesystem::path> reports, const std::filesystem::path& out_dir,
                  ReportFormat format, std::size_t bootstrap_resamples, std::uint64_t seed,
                  std::ostream& out, std::ostream& err);

// Validation diagnostics of a manifest (empty when clean).
std::vector<Diagnostic> validate_manifest(const Manifest& manifest);

}  // namespace rose
