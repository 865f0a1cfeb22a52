#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "rose/pipeline.hpp"
#include "rose/report.hpp"
#include "fixture_util.hpp"

using namespace rose;

namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ReportInputs handmade(bool with_oracle) {
  ReportInputs in;
  in.manifest_hash = "0123456789abcdef0123456789abcdef";
  in.task = "intent";
  in.language = "xx";
  in.generation_setup = "few-shot";
  in.n_runs = 2;
  in.metrics = {MetricId::ttr, MetricId::param_size, MetricId::random_baseline, MetricId::rose};
  in.candidates = {{"C", 3, "c"}, {"A", 1, "a"}, {"B", 2, "b"}};
  const std::vector<std::string> ids{"A", "B", "C"};
  const std::vector<double> ttr{1.0 / 3.0, 0.5, 1e-300};
  const std::vector<std::vector<double>> rnd{{1, 0}, {0, 1}, {0, 0}};
  for (std::size_t i = 0; i < 3; ++i) {
    in.metric_scores.push_back({MetricId::ttr, ids[i], ttr[i], {}});
    in.metric_scores.push_back({MetricId::param_size, ids[i], std::log(static_cast<double>(i + 1)), {}});
    in.metric_scores.push_back({MetricId::random_baseline, ids[i], (rnd[i][0] + rnd[i][1]) / 2, rnd[i]});
  }
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> means;
    for (std::size_t r = 0; r < 2; ++r) {
      double sum = 0;
      for (std::size_t p = 0; p < 3; ++p) {
        if (p == c) continue;
        const double f1 = 0.5 + 0.1 * static_cast<double>(c) + 0.01 * static_cast<double>(p + r);
        in.rose_cells.push_back({ids[c], ids[p], r, f1});
        sum += f1;
      }
      means.push_back(sum / 2);
    }
    in.metric_scores.push_back({MetricId::rose, ids[c], (means[0] + means[1]) / 2, means});
  }
  if (with_oracle) {
    OracleTable o;
    o.entries["A"] = {0.70, {0.69, 0.71}};
    o.entries["B"] = {0.80, {0.79, 0.81}};
    o.entries["C"] = {0.9000000000000001, {0.9, 0.9000000000000002}};
    in.oracle = o;
  }
  in.provenance = {{"f1_variant", "macro"}, {"tokenizer", "icu"}};
  return in;
}

struct Case {
  CaseData data;
  CaseEvaluation eval;
  EvalOptions opts;
};

Case pipeline_case(bool human) {
  SimSpec base;
  base.samples_per_label = 20;
  base.rng_seed = 12;
  std::vector<std::pair<std::string, KnobOverrides>> deg;
  std::vector<CandidateGenerator> cands;
  for (int i = 0; i < 4; ++i) {
    KnobOverrides k;
    k.label_noise_rate = 0.1 * i;
    deg.push_back({"g" + std::to_string(i), k});
    cands.push_back({"g" + std::to_string(i), static_cast<std::uint64_t>(i + 1), ""});
  }
  const auto fam = generate_candidate_family(base, deg, 0.3);
  std::optional<Dataset> h;
  if (human) h = generate_reference(base, 99, Split::human_test);
  Case c{case_from_family(fam, cands, h, 32), {}, {}};
  c.opts.n_runs = 3;
  c.opts.train.max_epochs = 5;
  c.opts.train.patience = 2;
  c.opts.train.n_buckets = 1u << 10;
  c.eval = evaluate_case(c.data, c.opts);
  return c;
}

}  // namespace

TEST(AssembleReport, CanonicalOrderAndOracleFields) {
  const RunReport r = assemble_report(handmade(true));
  ASSERT_EQ(r.candidates.size(), 3u);
  EXPECT_EQ(r.candidates[0].generator_id, "A");
  ASSERT_EQ(r.rankings.size(), 4u);
  EXPECT_EQ(r.rankings[0].metric_id, MetricId::ttr);
  EXPECT_EQ(r.rankings[0].order, (std::vector<std::string>{"B", "A", "C"}));
  EXPECT_FALSE(r.oracle_absent());
  EXPECT_EQ(r.matches.size(), 4u);
  EXPECT_EQ(r.gaps.size(), 4u);
  // rose picks C, the oracle best.
  const auto rose_gap = std::find_if(r.gaps.begin(), r.gaps.end(), [](const auto& g) { return g.metric_id == MetricId::rose; });
  EXPECT_EQ(rose_gap->choice, "C");
  EXPECT_EQ(rose_gap->gap, 0.0);
  for (const auto& g : r.gaps) EXPECT_LE(g.gap, 0.0);
  EXPECT_EQ(r.run_id(), "0123456789ab");
  EXPECT_TRUE(std::is_sorted(r.rose_cells.begin(), r.rose_cells.end(), [](const auto& a, const auto& b) {
    return std::tie(a.trained_on, a.run_index, a.evaluated_on) < std::tie(b.trained_on, b.run_index, b.evaluated_on);
  }));
}

TEST(AssembleReport, WithoutOracleOmitsDependentFields) {
  const RunReport r = assemble_report(handmade(false));
  EXPECT_TRUE(r.oracle_absent());
  EXPECT_TRUE(r.matches.empty());
  EXPECT_TRUE(r.gaps.empty());
  EXPECT_TRUE(r.correlations.empty());
  EXPECT_TRUE(r.significance.empty());
  EXPECT_EQ(r.rankings.size(), 4u);
  const auto md = render_report(r, ReportFormat::markdown_tables);
  EXPECT_NE(md.at("selection").find("oracle_absent"), std::string::npos);
  const auto csv = render_report(r, ReportFormat::csv_tables);
  EXPECT_EQ(csv.count("gaps"), 0u);
  EXPECT_NE(csv.at("run").find("oracle_absent,true"), std::string::npos);
}

TEST(AssembleReport, RejectsInconsistentInputs) {
  auto in = handmade(true);
  in.metric_scores.push_back({MetricId::ttr, "Z", 0.1, {}});
  EXPECT_THROW(assemble_report(in), Error);
  in = handmade(true);
  in.metrics.push_back(MetricId::bigram_div);
  EXPECT_THROW(assemble_report(in), Error);
  in = handmade(true);
  in.oracle->entries.erase("B");
  EXPECT_THROW(assemble_report(in), Error);
}

TEST(PerRunChoices, ArgmaxPerRunOrOverall) {
  std::vector<MetricScore> s{{MetricId::rose, "A", 0.5, {0.9, 0.1}}, {MetricId::rose, "B", 0.5, {0.2, 0.9}}};
  EXPECT_EQ(per_run_choices(s, 2), (std::vector<std::string>{"A", "B"}));
  std::vector<MetricScore> f{{MetricId::ttr, "B", 0.5, {}}, {MetricId::ttr, "A", 0.5, {}}};
  EXPECT_EQ(per_run_choices(f, 3), (std::vector<std::string>{"A", "A", "A"}));
}

TEST(Jsonl, RoundTripIsLosslessAndByteStable) {
  for (bool oracle : {true, false}) {
    const RunReport r = assemble_report(handmade(oracle));
    const std::string text = report_to_jsonl(r);
    EXPECT_EQ(text, report_to_jsonl(assemble_report(handmade(oracle))));
    std::istringstream in(text);
    const RunReport back = report_from_jsonl(in);
    EXPECT_EQ(back, r);
    EXPECT_EQ(report_to_jsonl(back), text);
  }
}

TEST(Jsonl, ExtremeDoublesSurvive) {
  auto in = handmade(true);
  in.metric_scores[0].value = std::numeric_limits<double>::denorm_min();
  in.metric_scores[1].value = 0.1 + 0.2;
  in.metric_scores[3].value = -0.0;
  const RunReport r = assemble_report(in);
  std::istringstream s(report_to_jsonl(r));
  const RunReport back = report_from_jsonl(s);
  for (std::size_t i = 0; i < r.metric_scores.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.metric_scores[i].value),
              std::bit_cast<std::uint64_t>(r.metric_scores[i].value));
  }
}

TEST(Jsonl, MalformedInputIsRejected) {
  std::istringstream empty("");
  EXPECT_THROW(report_from_jsonl(empty), Error);
  std::istringstream junk("{\"kind\":\"header\"\n");
  EXPECT_THROW(report_from_jsonl(junk), Error);
}

TEST(Render, CsvCellsRowCount) {
  const Case c = pipeline_case(true);
  const RunReport r = report_for_subset(c.data, c.eval, c.opts, {}, std::string(64, 'a'));
  const auto csv = render_report(r, ReportFormat::csv_tables);
  EXPECT_EQ(count_lines(csv.at("cells")), 1 + 3u * 4u * 3u);
  for (const char* t : {"run", "scores", "rankings", "cells", "oracle", "matches", "gaps", "correlations", "significance"}) {
    EXPECT_EQ(csv.count(t), 1u) << t;
  }
  // Every metric in scope appears exactly once.
  ASSERT_EQ(r.rankings.size(), kAllMetrics.size());
  for (std::size_t i = 0; i < kAllMetrics.size(); ++i) EXPECT_EQ(r.rankings[i].metric_id, kAllMetrics[i]);
  EXPECT_EQ(r.matches.size(), kAllMetrics.size());
  EXPECT_TRUE(r.matches[0].top3.has_value());
}

TEST(Render, WriteReportUsesRunIdDirectory) {
  const RunReport r = assemble_report(handmade(true));
  const auto dir = std::filesystem::temp_directory_path() / "rose_report_write";
  std::filesystem::remove_all(dir);
  const auto run_dir = write_report(r, dir, ReportFormat::markdown_tables);
  EXPECT_EQ(run_dir, dir / "0123456789ab");
  EXPECT_TRUE(std::filesystem::exists(run_dir / "scores.md"));
  write_report(r, dir, ReportFormat::json_lines);
  EXPECT_EQ(fixture::read_file(run_dir / "report.jsonl"), report_to_jsonl(r));
  EXPECT_EQ(load_report(run_dir / "report.jsonl"), r);
  std::filesystem::remove_all(dir);
}

TEST(Aggregate, TableShapes) {
  std::vector<RunReport> reports;
  for (const char* task : {"intent", "sentiment", "topic"}) {
    Case c = pipeline_case(true);
    c.data.task = task;
    reports.push_back(report_for_subset(c.data, c.eval, c.opts, {}, std::string(64, 'b')));
  }
  const Aggregate agg = aggregate_reports(reports, 200, 1);
  EXPECT_EQ(agg.n_reports, 3u);
  EXPECT_EQ(agg.tasks, (std::vector<std::string>{"intent", "sentiment", "topic"}));
  ASSERT_EQ(agg.rows.size(), 9u);
  for (const auto& row : agg.rows) {
    EXPECT_EQ(row.n_cases, 3u);
    EXPECT_LE(row.top1_count, 3u);
    EXPECT_EQ(row.mean_gap_by_task.size(), 3u);
  }
  const auto md = render_aggregate(agg, ReportFormat::markdown_tables);
  // Header and separator, then one row per metric.
  EXPECT_EQ(count_lines(md.at("gaps_by_task")), 2 + 9u);
  EXPECT_EQ(count_lines(md.at("table1")), 2 + 9u);
  EXPECT_NE(md.at("table1").find("top1_count"), std::string::npos);
  EXPECT_EQ(render_aggregate(agg, ReportFormat::csv_tables), render_aggregate(aggregate_reports(reports, 200, 1), ReportFormat::csv_tables));
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(std::stod(format_number(0.1 + 0.2)), 0.1 + 0.2);
}
