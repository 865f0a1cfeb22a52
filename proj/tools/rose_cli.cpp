#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rose/hashing.hpp"
#include "rose/manifest.hpp"
#include "rose/pipeline.hpp"
#include "rose/simgen.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoul(item));
  }
  return out;
}

// Writes a generated family, a clean human test set and a manifest.
int write_simgen(const fs::path& dir, const std::string& family, std::uint64_t seed,
                 std::size_t samples_per_label, double test_fraction, std::ostream& out) {
  rose::SimSpec base;
  base.samples_per_label = samples_per_label;
  base.shared_vocab = 100;
  base.rng_seed = seed;

  std::vector<std::pair<std::string, rose::KnobOverrides>> degradations;
  if (family == "noise") {
    for (int i = 0; i < 6; ++i) {
      rose::KnobOverrides o;
      o.label_noise_rate = 0.1 * i;
      degradations.push_back({"g" + std::to_string(i), o});
    }
  } else if (family == "mixed") {
    const std::vector<std::tuple<double, double, double>> knobs = {
        {0.0, 0.0, 0.0}, {0.3, 0.0, 0.0}, {0.0, 0.6, 0.0}, {0.0, 0.0, 0.6}, {0.15, 0.3, 0.3}};
    for (std::size_t i = 0; i < knobs.size(); ++i) {
      rose::KnobOverrides o;
      o.label_noise_rate = std::get<0>(knobs[i]);
      o.duplication_rate = std::get<1>(knobs[i]);
      o.vocab_collapse = std::get<2>(knobs[i]);
      degradations.push_back({"g" + std::to_string(i), o});
    }
  } else {
    std::cerr << "unknown family '" << family << "' (expected noise or mixed)\n";
    return 1;
  }

  const auto fam = rose::generate_candidate_family(base, degradations, test_fraction);
  fs::create_directories(dir);
  rose::Manifest m;
  m.labels = rose::sim_labels(base.n_labels);
  m.task = "simgen-" + family;
  m.language = "synthetic";
  m.generation_setup = "simgen";
  m.master_seed = seed;
  m.output_dir = dir / "out";
  m.test_fraction = test_fraction;
  std::size_t i = 0;
  for (const auto& id : fam.ground_truth_order) {
    const auto& tt = fam.datasets.at(id);
    rose::ManifestCandidate c;
    // Later (more degraded) candidates claim more parameters.
    c.generator = {id, static_cast<std::uint64_t>(++i) * 1000000000ull, id};
    c.train = dir / (id + ".train.jsonl");
    c.test = dir / (id + ".test.jsonl");
    rose::write_dataset(tt.train, *c.train);
    rose::write_dataset(tt.test, *c.test);
    m.candidates.push_back(std::move(c));
  }
  m.human_test = dir / "human.test.jsonl";
  rose::write_dataset(rose::generate_reference(base, rose::SeedBuilder(seed).add("human").seed(),
                                               rose::Split::human_test),
                      *m.human_test);
  const auto manifest_path = dir / "manifest.json";
  std::ofstream(manifest_path, std::ios::binary) << rose::manifest_to_json(m, dir);
  out << manifest_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic data generator selection: RoSE and intrinsic proxy metrics"};
  app.require_subcommand(1);

  std::string manifest, metrics, out_dir, format = "json-lines";
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--manifest", manifest, "Run manifest (JSON)")->required();
    cmd->add_option("--metrics", metrics, "Comma-separated metric ids to compute");
    cmd->add_option("--seed", seed, "Master seed (overrides the manifest)");
    cmd->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out_dir, "Output directory (overrides the manifest)");
    cmd->add_option("--format", format, "json-lines, csv-tables or markdown-tables")
        ->check(CLI::IsMember({"json-lines", "csv-tables", "markdown-tables"}));
  };

  auto* validate = app.add_subcommand("validate", "Check that every input loads and aligns");
  validate->add_option("--manifest", manifest, "Run manifest (JSON)")->required();

  auto* run = app.add_subcommand("run", "Compute all metrics and write the run report");
  add_run_flags(run);

  auto* sweep = app.add_subcommand("sweep", "Candidate-subset or k-subset sweep");
  add_run_flags(sweep);
  std::string mode = "subsets", ks;
  std::size_t m_min = 2, m_max = 0;
  sweep->add_option("--mode", mode, "subsets or k")->check(CLI::IsMember({"subsets", "k"}));
  sweep->add_option("--m-min", m_min, "Smallest subset size");
  sweep->add_option("--m-max", m_max, "Largest subset size (default: all candidates)");
  sweep->add_option("--k", ks, "Comma-separated k values (default: 1..n-1)");

  auto* aggregate = app.add_subcommand("aggregate", "Summarize several run reports");
  std::vector<std::string> reports;
  std::size_t resamples = 1000;
  aggregate->add_option("reports", reports, "report.jsonl files")->required();
  aggregate->add_option("--out", out_dir, "Output directory")->required();
  aggregate->add_option("--format", format, "json-lines, csv-tables or markdown-tables")
      ->check(CLI::IsMember({"json-lines", "csv-tables", "markdown-tables"}));
  aggregate->add_option("--bootstrap", resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  aggregate->add_option("--seed", seed, "Bootstrap seed");

  auto* simgen = app.add_subcommand("simgen", "Write a generated candidate family and manifest");
  std::string family = "noise";
  std::size_t spl = 200;
  double test_fraction = 0.5;
  simgen->add_option("--out", out_dir, "Directory to write into")->required();
  simgen->add_option("--family", family, "noise or mixed")->check(CLI::IsMember({"noise", "mixed"}));
  simgen->add_option("--seed", seed, "Fixture seed");
  simgen->add_option("--samples-per-label", spl, "Samples per label")->check(CLI::PositiveNumber);
  simgen->add_option("--test-fraction", test_fraction, "Synthetic test fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    rose::RunOptions ro;
    ro.manifest = manifest;
    if (!metrics.empty()) ro.metrics = rose::parse_metric_list(metrics);
    if ((run->parsed() || sweep->parsed()) && (run->count("--seed") || sweep->count("--seed"))) ro.seed = seed;
    ro.workers = workers;
    if (!out_dir.empty()) ro.out = out_dir;
    ro.format = rose::report_format_from_string(format);

    if (validate->parsed()) return rose::cmd_validate(manifest, std::cout, std::cerr);
    if (run->parsed()) return rose::cmd_run(ro, std::cout, std::cerr);
    if (sweep->parsed()) {
      rose::SweepOptions so;
      so.mode = mode;
      so.m_min = m_min;
      if (m_max) so.m_max = m_max;
      so.k_values = parse_sizes(ks);
      return rose::cmd_sweep(ro, so, std::cout, std::cerr);
    }
    if (aggregate->parsed()) {
      std::vector<fs::path> paths(reports.begin(), reports.end());
      return rose::cmd_aggregate(paths, out_dir, ro.format, resamples, seed, std::cout, std::cerr);
    }
    if (simgen->parsed()) return write_simgen(out_dir, family, seed, spl, test_fraction, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
