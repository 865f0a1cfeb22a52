#include "rose/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rose/hashing.hpp"

namespace rose {

namespace {

constexpr const char* kOracleSet = "oracle";

bool enabled(const EvalOptions& o, MetricId m) {
  return std::find(o.metrics.begin(), o.metrics.end(), m) != o.metrics.end();
}

template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    std::string msg;
    for (const auto& d : e.diagnostics()) msg += (msg.empty() ? "" : "; ") + d.to_string();
    throw StageError(stage, msg);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_tables(const std::filesystem::path& dir, const std::map<std::string, std::string>& tables,
                  ReportFormat format) {
  const std::string ext = format == ReportFormat::json_lines   ? "jsonl"
                          : format == ReportFormat::csv_tables ? "csv"
                                                               : "md";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  for (const auto& [name, body] : tables) {
    const auto path = dir / (name + "." + ext);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << body;
    if (!f) throw Error("cannot write '" + path.string() + "'");
  }
}

std::vector<std::string> ids_of(std::span<const CandidateGenerator> cands) {
  std::vector<std::string> ids;
  for (const auto& c : cands) ids.push_back(c.generator_id);
  return ids;
}

Dataset joined(const TrainTest& tt) { return concat(tt.train, tt.test); }

bool has_tokens(const Dataset& d) {
  return std::any_of(d.samples.begin(), d.samples.end(), [](const Sample& s) { return s.tokens.has_value(); });
}

void print_diagnostics(const std::vector<Diagnostic>& diags, std::ostream& err) {
  for (const auto& d : diags) err << d.to_string() << "\n";
}

EvalOptions options_from(const Manifest& m, const RunOptions& ro) {
  EvalOptions o;
  o.metrics = ro.metrics ? *ro.metrics : m.metrics;
  o.n_runs = m.n_runs;
  o.train = m.train;
  o.cross_subset_size = m.cross_subset_size;
  o.master_seed = ro.seed ? *ro.seed : m.master_seed;
  o.workers = std::max<std::size_t>(1, ro.workers);
  o.silhouette_distance = m.silhouette_distance;
  return o;
}

// Manifest with command-line overrides folded in, so that hashing sees the
// configuration actually used.
Manifest effective(Manifest m, const RunOptions& ro) {
  if (ro.metrics) m.metrics = *ro.metrics;
  if (ro.seed) m.master_seed = *ro.seed;
  if (ro.out) m.output_dir = *ro.out;
  return m;
}

struct SubsetOutcome {
  RunReport report;
  std::optional<RoseResult> rose;
};

SubsetOutcome subset_outcome(const CaseData& data, const CaseEvaluation& eval, const EvalOptions& options,
                             std::span<const std::string> subset, const std::string& hash) {
  std::vector<std::string> ids(subset.begin(), subset.end());
  if (ids.empty()) ids = ids_of(data.candidates);
  std::sort(ids.begin(), ids.end());
  const std::set<std::string> id_set(ids.begin(), ids.end());
  if (id_set.size() != ids.size()) throw Error("duplicate candidate in subset");

  ReportInputs in;
  in.manifest_hash = hash;
  in.task = data.task;
  in.language = data.language;
  in.generation_setup = data.generation_setup;
  in.n_runs = options.n_runs;
  in.metrics = options.metrics;
  for (const auto& c : data.candidates) {
    if (id_set.contains(c.generator_id)) in.candidates.push_back(c);
  }
  if (in.candidates.size() != ids.size()) throw Error("subset names an unknown candidate");

  for (const auto& s : eval.fixed_scores) {
    if (id_set.contains(s.generator_id) && enabled(options, s.metric_id)) in.metric_scores.push_back(s);
  }
  if (enabled(options, MetricId::random_baseline)) {
    SeedBuilder sb(options.master_seed);
    sb.add("random");
    for (const auto& id : ids) sb.add(id);
    for (auto& s : random_baseline(in.candidates, options.n_runs, sb.seed())) {
      in.metric_scores.push_back(std::move(s));
    }
  }

  SubsetOutcome out;
  if (enabled(options, MetricId::rose)) {
    if (!eval.cross) throw Error("rose enabled but no cross evaluation");
    RoseConfig rc;
    rc.n_runs = options.n_runs;
    rc.train_config = options.train;
    rc.master_seed = options.master_seed;
    if (options.cross_subset_size && *options.cross_subset_size + 1 < ids.size()) {
      rc.cross_subset_size = options.cross_subset_size;
    }
    RoseResult rr = rose_from_cross(*eval.cross, ids, rc);
    for (const auto& s : rr.scores) {
      in.metric_scores.push_back({MetricId::rose, s.generator_id, s.score, s.per_run_means});
      in.rose_cells.insert(in.rose_cells.end(), s.cells.begin(), s.cells.end());
    }
    out.rose = std::move(rr);
  }

  if (data.human_test) {
    const auto& f1 = eval.cross->extra.at(kOracleSet);
    OracleTable oracle;
    for (const auto& id : ids) {
      const std::size_t c = eval.cross->index_of(id);
      OracleEntry e;
      for (std::size_t r = 0; r < options.n_runs; ++r) e.per_run.push_back(f1[c * options.n_runs + r]);
      e.f1 = mean(e.per_run);
      oracle.entries[id] = std::move(e);
    }
    in.oracle = std::move(oracle);
  }

  auto& p = in.provenance;
  p["classifier"] = "hashed-logistic-regression";
  p["f1_variant"] = "macro";
  p["early_stopping"] = "validation macro-F1";
  p["tokenizer"] = data.pretokenized ? "pretokenized-input" : "builtin-unicode-word-runs";
  p["text_basis"] = "normalized";
  p["punctuation_removed"] = "unicode-categories-P";
  p["entropy_base"] = "e";
  p["silhouette_distance"] = std::string(to_string(options.silhouette_distance));
  p["valid_fraction_basis"] = "pre-balance";
  p["pearson_ci"] = "fisher-z";
  p["significance"] = "mann-whitney per-run gaps vs random_baseline";
  p["oracle_models"] = "rose per-run models on human test";
  p["master_seed"] = std::to_string(options.master_seed);
  p["cross_subset_size"] =
      options.cross_subset_size ? std::to_string(*options.cross_subset_size) : "all";
  if (!data.embeddings.empty()) {
    p["embedding_provider"] = std::string(to_string(data.embeddings.begin()->second.provider));
    p["embedding_dim"] = std::to_string(data.embeddings.begin()->second.dim);
  }
  for (const auto& id : ids) {
    auto it = eval.valid_source.find(id);
    if (it != eval.valid_source.end()) p["valid_fraction_source." + id] = std::string(to_string(it->second));
  }

  out.report = assemble_report(std::move(in));
  return out;
}

void summarize(SweepResult& sweep) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const SweepRow*>> groups;
  for (const auto& r : sweep.rows) {
    const auto pos = static_cast<std::size_t>(
        std::find(kAllMetrics.begin(), kAllMetrics.end(), r.metric_id) - kAllMetrics.begin());
    groups[{r.size, pos}].push_back(&r);
  }
  for (const auto& [key, rows] : groups) {
    SweepSummary s;
    s.size = key.first;
    s.metric_id = kAllMetrics[key.second];
    s.n_runs = rows.size();
    double gap = 0.0, top1 = 0.0;
    for (const auto* r : rows) {
      gap += r->gap;
      top1 += r->top1 ? 1.0 : 0.0;
    }
    s.mean_gap = gap / static_cast<double>(rows.size());
    s.top1_rate = top1 / static_cast<double>(rows.size());
    sweep.summary.push_back(s);
  }
}

void add_rows(SweepResult& sweep, std::size_t size, const RunReport& rep) {
  std::string joined;
  for (const auto& c : rep.candidates) joined += (joined.empty() ? "" : "+") + c.generator_id;
  for (std::size_t i = 0; i < rep.gaps.size(); ++i) {
    sweep.rows.push_back({size, joined, rep.gaps[i].metric_id, rep.gaps[i].choice, rep.gaps[i].gap,
                          rep.matches[i].top1});
  }
}

struct Loaded {
  Manifest manifest;
  EvalOptions options;
  std::string hash;
};

// Shared front half of run and sweep. Returns an exit code when loading or
// validation fails.
std::optional<int> load_for_run(const RunOptions& ro, Loaded& out, std::ostream& err) {
  try {
    out.manifest = effective(load_manifest(ro.manifest), ro);
  } catch (const ValidationError& e) {
    print_diagnostics(e.diagnostics(), err);
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  std::vector<Diagnostic> diags;
  try {
    diags = validate_manifest(out.manifest);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (!diags.empty()) {
    print_diagnostics(diags, err);
    return 1;
  }
  out.options = options_from(out.manifest, ro);
  try {
    out.hash = staged("hash", [&] { return manifest_hash(out.manifest); });
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return std::nullopt;
}

}  // namespace

CaseData prepare_case(const Manifest& m, std::uint64_t master_seed) {
  CaseData data;
  data.task = m.task;
  data.language = m.language;
  data.generation_setup = m.generation_setup;
  data.labels = m.labels;

  auto candidates = m.candidates;
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a.generator.generator_id < b.generator.generator_id;
  });
  for (const auto& c : candidates) {
    const std::string& id = c.generator.generator_id;
    data.candidates.push_back(c.generator);

    auto tag = [&](Dataset d, Split split) {
      d.generator_id = id;
      d.task = m.task;
      d.language = m.language;
      d.split = split;
      d.n_requested = c.n_requested;
      return d;
    };
    auto balance_seed = [&](const Dataset& d) {
      return SeedBuilder(master_seed).add("balance").add(fingerprint(d)).seed();
    };

    TrainTest tt;
    if (c.data) {
      Dataset raw = staged("load", [&] { return tag(load_dataset(*c.data, m.labels), Split::synthetic_train); });
      Dataset full = staged("balance", [&] { return balance_by_label(raw, balance_seed(raw)); });
      auto [train, test] = staged("split", [&] {
        return split_dataset(full, m.test_fraction, SeedBuilder(master_seed).add("split").add(fingerprint(full)).seed());
      });
      tt.train = std::move(train);
      tt.test = std::move(test);
      data.raw[id] = std::move(raw);
    } else {
      Dataset train = staged("load", [&] { return tag(load_dataset(*c.train, m.labels), Split::synthetic_train); });
      Dataset test = staged("load", [&] { return tag(load_dataset(*c.test, m.labels), Split::synthetic_test); });
      data.raw[id] = concat(train, test);
      tt.train = staged("balance", [&] { return balance_by_label(train, balance_seed(train)); });
      tt.test = staged("balance", [&] { return balance_by_label(test, balance_seed(test)); });
    }
    tt.train.split = Split::synthetic_train;
    tt.test.split = Split::synthetic_test;
    data.pretokenized = data.pretokenized || has_tokens(data.raw[id]);

    EmbeddingConfig ec;
    ec.provider = m.embedding_provider;
    ec.dim = m.embedding_dim;
    if (c.embeddings) ec.path = *c.embeddings;
    data.embeddings[id] = staged("embeddings", [&] { return embed_dataset(joined(tt), ec); });
    data.splits.emplace(id, std::move(tt));
  }
  if (m.human_test) {
    data.human_test = staged("load", [&] {
      Dataset d = load_dataset(*m.human_test, m.labels);
      d.generator_id = "human";
      d.split = Split::human_test;
      return d;
    });
  }
  return data;
}

CaseData case_from_family(const CandidateFamily& family, std::span<const CandidateGenerator> candidates,
                          std::optional<Dataset> human_test, std::uint32_t embedding_dim) {
  CaseData data;
  data.generation_setup = "simgen";
  data.candidates.assign(candidates.begin(), candidates.end());
  std::sort(data.candidates.begin(), data.candidates.end(),
            [](const auto& a, const auto& b) { return a.generator_id < b.generator_id; });
  data.splits = family.datasets;
  for (const auto& c : data.candidates) {
    const auto it = family.datasets.find(c.generator_id);
    if (it == family.datasets.end()) throw Error("no datasets for candidate '" + c.generator_id + "'");
    data.labels = it->second.train.labels;
    data.raw[c.generator_id] = joined(it->second);
    EmbeddingConfig ec;
    ec.dim = embedding_dim;
    data.embeddings[c.generator_id] = embed_dataset(data.raw[c.generator_id], ec);
  }
  data.human_test = std::move(human_test);
  return data;
}

CaseEvaluation evaluate_case(const CaseData& data, const EvalOptions& options) {
  CaseEvaluation eval;
  if (options.metrics.empty()) throw StageError("intrinsic", "no metrics enabled");

  staged("intrinsic", [&] {
    for (const auto& c : data.candidates) {
      const std::string& id = c.generator_id;
      const Dataset full = joined(data.splits.at(id));
      const Dataset& raw = data.raw.at(id);
      auto put = [&](MetricId m, auto&& compute) {
        if (!enabled(options, m)) return;
        try {
          eval.fixed_scores.push_back({m, id, compute(), {}});
        } catch (const std::exception& e) {
          throw Error(std::string(to_string(m)) + " for '" + id + "': " + e.what());
        }
      };
      put(MetricId::avg_cos_dist, [&] { return avg_pairwise_cosine_distance(full, data.embeddings.at(id)); });
      put(MetricId::bigram_div, [&] { return bigram_diversity(full); });
      put(MetricId::n_valid, [&] {
        const ValidFraction v = valid_fraction(raw);
        eval.valid_source[id] = v.source;
        return v.value;
      });
      put(MetricId::silhouette, [&] {
        return silhouette_score(full, data.embeddings.at(id), options.silhouette_distance);
      });
      put(MetricId::ttr, [&] { return type_token_ratio(full); });
      put(MetricId::token_entropy, [&] { return token_entropy(full); });
      put(MetricId::param_size, [&] { return param_size_score(c); });
    }
    return 0;
  });

  if (enabled(options, MetricId::rose) || data.human_test) {
    staged("rose", [&] {
      RoseConfig rc;
      rc.n_runs = options.n_runs;
      rc.train_config = options.train;
      rc.master_seed = options.master_seed;
      rc.workers = options.workers;
      std::vector<NamedDataset> extra;
      if (data.human_test) extra.push_back({kOracleSet, &*data.human_test});
      const auto ids = ids_of(data.candidates);
      eval.cross = cross_evaluate(ids, data.splits, rc, extra);
      return 0;
    });
  }
  return eval;
}

RunReport report_for_subset(const CaseData& data, const CaseEvaluation& eval, const EvalOptions& options,
                            std::span<const std::string> subset, const std::string& hash) {
  return staged("stats", [&] { return subset_outcome(data, eval, options, subset, hash).report; });
}

std::string manifest_hash(const Manifest& manifest) {
  const auto base = std::filesystem::path(manifest.source).parent_path();
  Manifest m = manifest;
  m.output_dir = base;  // where results go does not change what they are
  std::uint64_t h = fnv1a64(manifest_to_json(m, base));
  auto add_file = [&](const std::filesystem::path& p) {
    std::string rel = p.lexically_relative(base).generic_string();
    if (rel.empty()) rel = p.generic_string();
    h = fnv1a64(rel, h);
    h = fnv1a64(read_file(p), h);
  };
  for (const auto& c : manifest.candidates) {
    for (const auto* p : {&c.data, &c.train, &c.test, &c.embeddings}) {
      if (*p) add_file(**p);
    }
  }
  if (manifest.human_train) add_file(*manifest.human_train);
  if (manifest.human_test) add_file(*manifest.human_test);
  return to_hex(h);
}

std::vector<Diagnostic> validate_manifest(const Manifest& m) {
  std::vector<Diagnostic> diags;
  const std::string src = m.source.string();
  auto load = [&](const std::filesystem::path& p) -> std::optional<Dataset> {
    try {
      return load_dataset(p, m.labels);
    } catch (const ValidationError& e) {
      diags.insert(diags.end(), e.diagnostics().begin(), e.diagnostics().end());
    } catch (const std::exception& e) {
      diags.push_back({p.string(), 0, e.what()});
    }
    return std::nullopt;
  };
  auto min_per_label = [&](const Dataset& d, const std::filesystem::path& p, std::size_t need) {
    const auto counts = label_counts(d);
    for (std::size_t l = 0; l < counts.size(); ++l) {
      if (counts[l] < need) {
        diags.push_back({p.string(), 0,
                         "label '" + m.labels[l] + "' has " + std::to_string(counts[l]) +
                             " samples; at least " + std::to_string(need) + " needed"});
      }
    }
  };

  std::optional<std::size_t> run_dim;
  for (const auto& c : m.candidates) {
    const std::string& id = c.generator.generator_id;
    std::vector<Sample> samples;
    std::vector<std::filesystem::path> files;
    if (c.data) {
      if (auto d = load(*c.data)) {
        min_per_label(*d, *c.data, 2);
        samples = d->samples;
        files.push_back(*c.data);
        if (c.n_requested && *c.n_requested < d->samples.size()) {
          diags.push_back({src, 0, "candidate '" + id + "': n_requested is smaller than the number of samples"});
        }
      }
    } else if (c.train && c.test) {
      auto tr = load(*c.train);
      auto te = load(*c.test);
      if (tr) min_per_label(*tr, *c.train, 1);
      if (te) min_per_label(*te, *c.test, 1);
      if (tr && te) {
        std::set<std::string> seen;
        for (const auto& s : tr->samples) seen.insert(s.id);
        for (const auto& s : te->samples) {
          if (seen.contains(s.id)) {
            diags.push_back({c.test->string(), 0, "id '" + s.id + "' also appears in " + c.train->string()});
          }
        }
        samples = tr->samples;
        samples.insert(samples.end(), te->samples.begin(), te->samples.end());
        if (c.n_requested && *c.n_requested < samples.size()) {
          diags.push_back({src, 0, "candidate '" + id + "': n_requested is smaller than the number of samples"});
        }
      }
    }
    if (c.n_requested && *c.n_requested == 0) {
      diags.push_back({src, 0, "candidate '" + id + "': n_requested must be positive"});
    }

    if (m.embedding_provider != EmbeddingProvider::external_file || samples.empty()) continue;
    std::size_t dim = 0;
    if (c.embeddings) {
      try {
        const auto vectors = load_embedding_file(*c.embeddings, &dim);
        for (const auto& s : samples) {
          if (!vectors.contains(s.id)) {
            diags.push_back({c.embeddings->string(), 0, "missing embedding for id '" + s.id + "'"});
          }
        }
      } catch (const ValidationError& e) {
        diags.insert(diags.end(), e.diagnostics().begin(), e.diagnostics().end());
        continue;
      } catch (const std::exception& e) {
        diags.push_back({c.embeddings->string(), 0, e.what()});
        continue;
      }
    } else {
      for (const auto& s : samples) {
        if (!s.embedding) {
          diags.push_back({src, 0, "candidate '" + id + "': missing embedding for id '" + s.id + "'"});
        } else {
          dim = s.embedding->size();
        }
      }
    }
    if (dim != 0) {
      if (run_dim && *run_dim != dim) {
        diags.push_back({src, 0, "candidate '" + id + "': embedding dimension " + std::to_string(dim) +
                                     " differs from " + std::to_string(*run_dim)});
      }
      if (!run_dim) run_dim = dim;
    }
  }
  if (m.human_train) load(*m.human_train);
  if (m.human_test) {
    if (auto d = load(*m.human_test); d && d->samples.empty()) {
      diags.push_back({m.human_test->string(), 0, "human test data is empty"});
    }
  }
  return diags;
}

SweepResult sweep_subsets(const CaseData& data, const CaseEvaluation& eval, const EvalOptions& options,
                          std::size_t m_min, std::size_t m_max) {
  const auto ids = ids_of(data.candidates);
  const std::size_t n = ids.size();
  if (m_min < 2 || m_min > m_max || m_max > n) {
    throw Error("invalid subset range " + std::to_string(m_min) + ".." + std::to_string(m_max) + " for " +
                std::to_string(n) + " candidates");
  }
  SweepResult sweep;
  sweep.mode = "subsets";
  for (std::size_t m = m_min; m <= m_max; ++m) {
    // Lexicographic m-combinations of the sorted ids.
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    while (true) {
      std::vector<std::string> subset;
      for (std::size_t i : idx) subset.push_back(ids[i]);
      auto outcome = subset_outcome(data, eval, options, subset, "");
      add_rows(sweep, m, outcome.report);
      if (outcome.rose) sweep.rose_results.push_back(std::move(*outcome.rose));
      ++sweep.n_subset_runs;

      std::size_t i = m;
      while (i > 0 && idx[i - 1] == n - m + (i - 1)) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < m; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  summarize(sweep);
  return sweep;
}

SweepResult sweep_k(const CaseData& data, const CaseEvaluation& eval, const EvalOptions& options,
                    std::span<const std::size_t> k_values) {
  const std::size_t n = data.candidates.size();
  SweepResult sweep;
  sweep.mode = "k";
  for (std::size_t k : k_values) {
    if (k < 1 || k + 1 > n) {
      throw Error("invalid k " + std::to_string(k) + " for " + std::to_string(n) + " candidates");
    }
    EvalOptions o = options;
    o.cross_subset_size = k;
    auto outcome = subset_outcome(data, eval, o, {}, "");
    add_rows(sweep, k, outcome.report);
    if (outcome.rose) sweep.rose_results.push_back(std::move(*outcome.rose));
    ++sweep.n_subset_runs;
  }
  summarize(sweep);
  return sweep;
}

std::map<std::string, std::string> render_sweep(const SweepResult& sweep, ReportFormat format) {
  using nlohmann::json;
  std::map<std::string, std::string> out;
  const std::string size_col = sweep.mode == "k" ? "k" : "m";
  if (format == ReportFormat::json_lines) {
    std::string s = json({{"kind", "sweep_header"}, {"mode", sweep.mode}, {"n_subset_runs", sweep.n_subset_runs}})
                        .dump() +
                    "\n";
    for (const auto& r : sweep.rows) {
      s += json({{"kind", "sweep_row"},
                 {size_col, r.size},
                 {"subset", r.subset},
                 {"metric", std::string(to_string(r.metric_id))},
                 {"choice", r.choice},
                 {"gap", r.gap},
                 {"top1", r.top1}})
               .dump() +
           "\n";
    }
    for (const auto& r : sweep.summary) {
      s += json({{"kind", "sweep_summary"},
                 {size_col, r.size},
                 {"metric", std::string(to_string(r.metric_id))},
                 {"mean_gap", r.mean_gap},
                 {"top1_rate", r.top1_rate},
                 {"n_runs", r.n_runs}})
               .dump() +
           "\n";
    }
    out["sweep"] = s;
    return out;
  }
  const bool csv = format == ReportFormat::csv_tables;
  auto line = [&](const std::vector<std::string>& cells, bool header) {
    std::string l;
    if (csv) {
      for (std::size_t i = 0; i < cells.size(); ++i) l += (i ? "," : "") + cells[i];
      return l + "\n";
    }
    l = "|";
    for (const auto& c : cells) l += " " + c + " |";
    l += "\n";
    if (header) {
      l += "|";
      for (std::size_t i = 0; i < cells.size(); ++i) l += i == 0 ? "---|" : "---:|";
      l += "\n";
    }
    return l;
  };
  auto num = [&](double v) {
    if (csv) return format_number(v);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::string runs = line({size_col, "subset", "metric", "choice", "gap_pp", "top1"}, true);
  for (const auto& r : sweep.rows) {
    runs += line({std::to_string(r.size), r.subset, std::string(to_string(r.metric_id)), r.choice, num(r.gap),
                  r.top1 ? "true" : "false"},
                 false);
  }
  std::string summary = line({size_col, "metric", "mean_gap_pp", "top1_rate", "n_runs"}, true);
  for (const auto& r : sweep.summary) {
    summary += line({std::to_string(r.size), std::string(to_string(r.metric_id)), num(r.mean_gap),
                     num(r.top1_rate), std::to_string(r.n_runs)},
                    false);
  }
  out["sweep_runs"] = runs;
  out["sweep_summary"] = summary;
  return out;
}

int cmd_validate(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  try {
    const Manifest m = load_manifest(path);
    const auto diags = validate_manifest(m);
    if (!diags.empty()) {
      print_diagnostics(diags, err);
      err << diags.size() << " problem(s) found\n";
      return 1;
    }
    out << "ok: " << m.candidates.size() << " candidates, " << m.labels.size() << " labels\n";
    return 0;
  } catch (const ValidationError& e) {
    print_diagnostics(e.diagnostics(), err);
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_run(const RunOptions& ro, std::ostream& out, std::ostream& err) {
  Loaded l;
  if (auto code = load_for_run(ro, l, err)) return *code;
  try {
    const CaseData data = prepare_case(l.manifest, l.options.master_seed);
    const CaseEvaluation eval = evaluate_case(data, l.options);
    const RunReport rep = report_for_subset(data, eval, l.options, {}, l.hash);
    const auto dir = staged("report", [&] { return write_report(rep, l.manifest.output_dir, ro.format); });
    out << dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_sweep(const RunOptions& ro, const SweepOptions& so, std::ostream& out, std::ostream& err) {
  Loaded l;
  if (auto code = load_for_run(ro, l, err)) return *code;
  if (!l.manifest.human_test) {
    err << l.manifest.source.string() << ": sweep needs human test data to measure gaps\n";
    return 1;
  }
  const std::size_t n = l.manifest.candidates.size();
  if (so.mode == "subsets") {
    const std::size_t hi = so.m_max.value_or(n);
    if (so.m_min < 2 || so.m_min > hi || hi > n) {
      err << "invalid subset range " << so.m_min << ".." << hi << " for " << n << " candidates\n";
      return 1;
    }
  } else if (so.mode == "k") {
    for (std::size_t k : so.k_values) {
      if (k < 1 || k + 1 > n) {
        err << "invalid k " << k << " for " << n << " candidates\n";
        return 1;
      }
    }
  } else {
    err << "unknown sweep mode '" << so.mode << "'\n";
    return 1;
  }
  try {
    const CaseData data = prepare_case(l.manifest, l.options.master_seed);
    const CaseEvaluation eval = evaluate_case(data, l.options);
    SweepResult sweep = staged("stats", [&] {
      if (so.mode == "subsets") return sweep_subsets(data, eval, l.options, so.m_min, so.m_max.value_or(n));
      std::vector<std::size_t> ks = so.k_values;
      if (ks.empty()) {
        for (std::size_t k = 1; k < n; ++k) ks.push_back(k);
      }
      return sweep_k(data, eval, l.options, ks);
    });
    const auto dir = l.manifest.output_dir / l.hash.substr(0, 12);
    staged("report", [&] {
      write_tables(dir, render_sweep(sweep, ro.format), ro.format);
      return 0;
    });
    out << dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_aggregate(std::span<const std::filesystem::path> paths, const std::filesystem::path& out_dir,
                  ReportFormat format, std::size_t bootstrap_resamples, std::uint64_t seed,
                  std::ostream& out, std::ostream& err) {
  if (paths.empty()) {
    err << "aggregate: no reports given\n";
    return 1;
  }
  try {
    std::vector<RunReport> reports;
    std::vector<std::string> hashes;
    for (const auto& p : paths) {
      reports.push_back(load_report(p));
      hashes.push_back(reports.back().manifest_hash);
    }
    std::sort(hashes.begin(), hashes.end());
    std::uint64_t h = fnv1a64("aggregate");
    for (const auto& x : hashes) h = fnv1a64(x, h);
    const Aggregate agg = aggregate_reports(reports, bootstrap_resamples, seed);
    const auto dir = out_dir / ("agg-" + to_hex(h).substr(0, 12));
    write_tables(dir, render_aggregate(agg, format), format);
    out << dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace rose
