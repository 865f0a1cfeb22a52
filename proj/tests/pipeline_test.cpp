#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixture_util.hpp"
#include "rose/pipeline.hpp"

using namespace rose;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("rose_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Ten-line two-label dataset; `bad_line` (1-based) carries an unknown label.
void write_lines(const fs::path& p, std::size_t bad_line, const std::string& prefix) {
  std::ofstream out(p);
  for (std::size_t i = 1; i <= 10; ++i) {
    const std::string label = i == bad_line ? "Q" : (i % 2 ? "a" : "b");
    out << R"({"id":")" << prefix << i << R"(","text":"sample number )" << i << " " << label << R"(","label":")"
        << label << "\"}\n";
  }
}

fs::path small_manifest(const fs::path& dir, std::size_t bad_line = 0) {
  Manifest m;
  m.labels = LabelSet({"a", "b"});
  for (const char* id : {"x", "y"}) {
    ManifestCandidate c;
    c.generator = {id, 1, id};
    c.data = dir / (std::string(id) + ".jsonl");
    write_lines(*c.data, id == std::string("y") ? bad_line : 0, id);
    m.candidates.push_back(c);
  }
  const auto path = dir / "manifest.json";
  std::ofstream(path) << manifest_to_json(m, dir);
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ROSE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Manifest, ParsesDefaultsAndRejectsUnknownKeys) {
  const auto m = parse_manifest(R"({"labels":["a","b"],"candidates":[
      {"id":"p","param_count":3,"data":"p.jsonl"},{"id":"q","param_count":7,"train":"q1.jsonl","test":"q2.jsonl"}]})",
                                "/base");
  EXPECT_EQ(m.n_runs, 10u);
  EXPECT_EQ(m.train, TrainConfig{});
  EXPECT_EQ(m.candidates[0].data, fs::path("/base/p.jsonl"));
  EXPECT_EQ(m.candidates[1].generator.param_count, 7u);
  EXPECT_EQ(m.output_dir, fs::path("/base/out"));

  try {
    parse_manifest(R"({"labels":["a","b"],"candidates":[{"id":"p","param_count":1,"data":"p"}],"bogus":1,"rose":{"n_runs":"x"}})",
                   "/base");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_GE(e.diagnostics().size(), 3u);  // unknown key, bad type, one candidate
  }
  EXPECT_THROW(parse_manifest(R"({"labels":["a","b"],"candidates":[{"id":"p","param_count":1,"data":"p","train":"t","test":"u"},
      {"id":"q","param_count":1,"data":"q"}]})", "/"), ValidationError);
}

TEST(Manifest, MetricListIsCanonicalized) {
  EXPECT_EQ(parse_metric_list("rose,param_size"), (std::vector<MetricId>{MetricId::param_size, MetricId::rose}));
  EXPECT_THROW(parse_metric_list(""), Error);
  EXPECT_THROW(parse_metric_list("rose,nope"), Error);
}

TEST(Manifest, JsonRoundTrip) {
  const auto dir = scratch("roundtrip");
  const auto path = fixture::write_fixture(dir, {});
  const Manifest m = load_manifest(path);
  EXPECT_EQ(manifest_to_json(parse_manifest(manifest_to_json(m, dir), dir), dir), manifest_to_json(m, dir));
}

TEST(Validate, CleanManifestExitsZero) {
  const auto dir = scratch("clean");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(small_manifest(dir), out, err), 0);
  EXPECT_EQ(err.str(), "");
}

TEST(Validate, BadLabelNamesFileAndLine) {
  const auto dir = scratch("badlabel");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(small_manifest(dir, 7), out, err), 1);
  EXPECT_NE(err.str().find("y.jsonl:7:"), std::string::npos) << err.str();
  EXPECT_NE(err.str().find("'Q'"), std::string::npos);
}

TEST(Validate, MissingEmbeddingNamesId) {
  const auto dir = scratch("emb");
  small_manifest(dir);
  Manifest m = load_manifest(dir / "manifest.json");
  m.embedding_provider = EmbeddingProvider::external_file;
  for (auto& c : m.candidates) {
    c.embeddings = dir / (c.generator.generator_id + ".emb.jsonl");
    std::ofstream out(*c.embeddings);
    for (int i = 1; i <= 10; ++i) {
      if (c.generator.generator_id == "y" && i == 4) continue;
      out << R"({"id":")" << c.generator.generator_id << i << R"(","vector":[1,)" << i << "]}\n";
    }
  }
  std::ofstream(dir / "manifest.json") << manifest_to_json(m, dir);
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(dir / "manifest.json", out, err), 1);
  EXPECT_NE(err.str().find("'y4'"), std::string::npos) << err.str();
}

TEST(Validate, MissingFileAndBadManifest) {
  const auto dir = scratch("missing");
  const auto path = small_manifest(dir);
  fs::remove(dir / "x.jsonl");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate(path, out, err), 1);
  EXPECT_NE(err.str().find("x.jsonl"), std::string::npos);
  std::ofstream(dir / "broken.json") << "{not json";
  EXPECT_EQ(cmd_validate(dir / "broken.json", out, err), 1);
}

TEST(Run, DeterministicAcrossRepeatsAndWorkers) {
  const auto dir = scratch("determinism");
  RunOptions ro;
  ro.manifest = fixture::write_fixture(dir / "in", {});
  std::ostringstream out, err;
  ro.out = dir / "a";
  ASSERT_EQ(cmd_run(ro, out, err), 0) << err.str();
  ro.out = dir / "b";
  ASSERT_EQ(cmd_run(ro, out, err), 0);
  ro.out = dir / "c";
  ro.workers = 3;
  ASSERT_EQ(cmd_run(ro, out, err), 0);
  const auto a = fixture::read_tree(dir / "a");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a, fixture::read_tree(dir / "b"));
  EXPECT_EQ(a, fixture::read_tree(dir / "c"));

  ro.out = dir / "d";
  ro.seed = 99;
  ASSERT_EQ(cmd_run(ro, out, err), 0);
  EXPECT_NE(a.begin()->first, fixture::read_tree(dir / "d").begin()->first);
}

TEST(Run, MetricsFlagRestrictsScope) {
  const auto dir = scratch("metrics");
  RunOptions ro;
  ro.manifest = fixture::write_fixture(dir, {});
  ro.metrics = parse_metric_list("rose,param_size");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(ro, out, err), 0) << err.str();
  std::string run_dir = out.str();
  run_dir.pop_back();
  const RunReport r = load_report(fs::path(run_dir) / "report.jsonl");
  EXPECT_EQ(r.metrics, (std::vector<MetricId>{MetricId::param_size, MetricId::rose}));
  EXPECT_EQ(r.rankings.size(), 2u);
  for (const auto& s : r.metric_scores) {
    EXPECT_TRUE(s.metric_id == MetricId::param_size || s.metric_id == MetricId::rose);
  }
}

TEST(Run, WithoutHumanDataFlagsOracleAbsent) {
  const auto dir = scratch("nohuman");
  fixture::FixtureOptions o;
  o.human = false;
  RunOptions ro;
  ro.manifest = fixture::write_fixture(dir, o);
  ro.format = ReportFormat::markdown_tables;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_run(ro, out, err), 0) << err.str();
  std::string run_dir = out.str();
  run_dir.pop_back();
  EXPECT_NE(fixture::read_file(fs::path(run_dir) / "selection.md").find("oracle_absent"), std::string::npos);

  SweepOptions so;
  EXPECT_EQ(cmd_sweep(ro, so, out, err), 1);
}

TEST(Run, ManifestHashTracksInputs) {
  const auto dir = scratch("hash");
  const auto path = fixture::write_fixture(dir, {});
  Manifest m = load_manifest(path);
  const std::string h = manifest_hash(m);
  EXPECT_EQ(h, manifest_hash(load_manifest(path)));
  m.train.learning_rate = 0.002;
  EXPECT_NE(manifest_hash(m), h);
  std::ofstream(dir / "g1.test.jsonl", std::ios::app) << "\n";
  EXPECT_NE(manifest_hash(load_manifest(path)), h);
}

TEST(Sweep, SubsetCountsAndFullSetMatchesRun) {
  const auto dir = scratch("sweep");
  const Manifest m = load_manifest(fixture::write_fixture(dir, {}));
  const CaseData data = prepare_case(m, m.master_seed);
  EvalOptions opts;
  opts.n_runs = m.n_runs;
  opts.train = m.train;
  opts.master_seed = m.master_seed;
  const CaseEvaluation eval = evaluate_case(data, opts);

  const SweepResult s = sweep_subsets(data, eval, opts, 2, 4);
  EXPECT_EQ(s.n_subset_runs, 11u);
  EXPECT_EQ(s.rose_results.size(), 11u);
  EXPECT_EQ(s.rows.size(), 11u * kAllMetrics.size());
  EXPECT_EQ(s.rows.back().subset, "g0+g1+g2+g3");

  const RunReport full = report_for_subset(data, eval, opts, {}, manifest_hash(m));
  const SweepResult only = sweep_subsets(data, eval, opts, 4, 4);
  ASSERT_EQ(only.n_subset_runs, 1u);
  for (const auto& row : only.rows) {
    const auto& rank = full.rankings[static_cast<std::size_t>(row.metric_id)];
    EXPECT_EQ(row.choice, rank.order.front()) << to_string(row.metric_id);
  }
  EXPECT_THROW(sweep_subsets(data, eval, opts, 1, 4), Error);
  EXPECT_THROW(sweep_subsets(data, eval, opts, 2, 5), Error);

  const std::vector<std::size_t> ks{1, 2, 3};
  const SweepResult k = sweep_k(data, eval, opts, ks);
  EXPECT_EQ(k.rows.size(), ks.size() * kAllMetrics.size());
}

TEST(Sweep, CommandWritesTables) {
  const auto dir = scratch("sweepcmd");
  RunOptions ro;
  ro.manifest = fixture::write_fixture(dir, {});
  ro.format = ReportFormat::csv_tables;
  SweepOptions so;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(ro, so, out, err), 0) << err.str();
  std::string run_dir = out.str();
  run_dir.pop_back();
  const std::string runs = fixture::read_file(fs::path(run_dir) / "sweep_runs.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(runs.begin(), runs.end(), '\n')), 1 + 11u * kAllMetrics.size());
  so.m_min = 1;
  EXPECT_EQ(cmd_sweep(ro, so, out, err), 1);
  so = SweepOptions{};
  so.mode = "k";
  so.k_values = {4};
  EXPECT_EQ(cmd_sweep(ro, so, out, err), 1);
}

TEST(Aggregate, CommandCombinesReports) {
  const auto dir = scratch("agg");
  std::vector<fs::path> reports;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    fixture::FixtureOptions o;
    o.seed = seed;
    RunOptions ro;
    ro.manifest = fixture::write_fixture(dir / std::to_string(seed), o);
    std::ostringstream out, err;
    ASSERT_EQ(cmd_run(ro, out, err), 0) << err.str();
    std::string run_dir = out.str();
    run_dir.pop_back();
    reports.push_back(fs::path(run_dir) / "report.jsonl");
  }
  std::ostringstream out, err;
  ASSERT_EQ(cmd_aggregate(reports, dir / "agg", ReportFormat::markdown_tables, 100, 0, out, err), 0) << err.str();
  std::string agg_dir = out.str();
  agg_dir.pop_back();
  EXPECT_EQ(fs::path(agg_dir).filename().string().rfind("agg-", 0), 0u);
  EXPECT_TRUE(fs::exists(fs::path(agg_dir) / "table1.md"));
  EXPECT_EQ(cmd_aggregate({}, dir / "agg", ReportFormat::markdown_tables, 100, 0, out, err), 1);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const auto good = small_manifest(dir);
  EXPECT_EQ(run_cli("validate --manifest " + good.string()), 0);
  const auto bad_dir = scratch("cli_bad");
  EXPECT_EQ(run_cli("validate --manifest " + small_manifest(bad_dir, 7).string()), 1);
  EXPECT_EQ(run_cli("run"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("simgen --out " + (dir / "sim").string() + " --samples-per-label 20"), 0);
  EXPECT_EQ(run_cli("validate --manifest " + (dir / "sim" / "manifest.json").string()), 0);
}
