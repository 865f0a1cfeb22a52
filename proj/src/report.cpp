#include "rose/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rose/hashing.hpp"

namespace rose {

using nlohmann::json;

namespace {

std::vector<MetricScore> scores_of(std::span<const MetricScore> all, MetricId m) {
  std::vector<MetricScore> out;
  for (const auto& s : all) {
    if (s.metric_id == m) out.push_back(s);
  }
  return out;
}

template <class T>
const T* find_metric(const std::vector<T>& rows, MetricId m) {
  for (const auto& r : rows) {
    if (r.metric_id == m) return &r;
  }
  return nullptr;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

std::string csv_line(std::initializer_list<std::string> fields) {
  std::string line;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) line.push_back(',');
    line += csv_field(f);
    first = false;
  }
  return line + "\n";
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string opt_num(const std::optional<double>& v) { return v ? format_number(*v) : ""; }
std::string opt_fixed(const std::optional<double>& v) { return v ? fixed4(*v) : "-"; }
std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string md_row(const std::vector<std::string>& cells) {
  std::string line = "|";
  for (const auto& c : cells) line += " " + c + " |";
  return line + "\n";
}

std::string md_header(const std::vector<std::string>& cells) {
  std::string out = md_row(cells) + "|";
  for (std::size_t i = 0; i < cells.size(); ++i) out += i == 0 ? "---|" : "---:|";
  return out + "\n";
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_number: conversion failed");
  return std::string(buf, end);
}

std::vector<std::string> per_run_choices(std::span<const MetricScore> scores, std::size_t n_runs) {
  if (scores.empty()) throw Error("per_run_choices: no scores");
  const bool has_runs = std::all_of(scores.begin(), scores.end(), [&](const MetricScore& s) {
    return s.per_run_values.size() == n_runs;
  });
  std::vector<std::string> out;
  if (!has_runs) {
    out.assign(n_runs, rank_by_metric(scores).order.front());
    return out;
  }
  for (std::size_t r = 0; r < n_runs; ++r) {
    const MetricScore* best = &scores[0];
    for (const auto& s : scores) {
      const double v = s.per_run_values[r], b = best->per_run_values[r];
      if (v > b || (v == b && s.generator_id < best->generator_id)) best = &s;
    }
    out.push_back(best->generator_id);
  }
  return out;
}

RunReport assemble_report(ReportInputs in) {
  RunReport rep;
  rep.manifest_hash = std::move(in.manifest_hash);
  rep.task = std::move(in.task);
  rep.language = std::move(in.language);
  rep.generation_setup = std::move(in.generation_setup);
  rep.n_runs = in.n_runs;
  rep.provenance = std::move(in.provenance);

  rep.candidates = std::move(in.candidates);
  std::sort(rep.candidates.begin(), rep.candidates.end(),
            [](const auto& a, const auto& b) { return a.generator_id < b.generator_id; });
  std::set<std::string> ids;
  for (const auto& c : rep.candidates) {
    if (!ids.insert(c.generator_id).second) {
      throw Error("report: duplicate candidate '" + c.generator_id + "'");
    }
  }
  if (ids.empty()) throw Error("report: no candidates");

  std::set<MetricId> metric_set(in.metrics.begin(), in.metrics.end());
  if (metric_set.size() != in.metrics.size()) throw Error("report: metric listed twice");
  for (MetricId m : kAllMetrics) {
    if (metric_set.contains(m)) rep.metrics.push_back(m);
  }

  for (const auto& s : in.metric_scores) {
    if (!metric_set.contains(s.metric_id)) {
      throw Error("report: score for metric '" + std::string(to_string(s.metric_id)) +
                  "' which is not in scope");
    }
  }
  for (MetricId m : rep.metrics) {
    auto ms = scores_of(in.metric_scores, m);
    std::sort(ms.begin(), ms.end(),
              [](const auto& a, const auto& b) { return a.generator_id < b.generator_id; });
    std::set<std::string> got;
    for (const auto& s : ms) got.insert(s.generator_id);
    if (got.empty()) throw Error("report: missing metric '" + std::string(to_string(m)) + "'");
    if (got != ids || ms.size() != ids.size()) {
      throw Error("report: candidate set of metric '" + std::string(to_string(m)) +
                  "' differs from the run's candidates");
    }
    rep.rankings.push_back(rank_by_metric(ms));
    for (auto& s : ms) rep.metric_scores.push_back(std::move(s));
  }

  rep.rose_cells = std::move(in.rose_cells);
  for (const auto& c : rep.rose_cells) {
    if (!ids.contains(c.trained_on) || !ids.contains(c.evaluated_on)) {
      throw Error("report: RoSE cell refers to an unknown candidate");
    }
  }
  std::sort(rep.rose_cells.begin(), rep.rose_cells.end(), [](const auto& a, const auto& b) {
    return std::tie(a.trained_on, a.run_index, a.evaluated_on) <
           std::tie(b.trained_on, b.run_index, b.evaluated_on);
  });

  rep.oracle = std::move(in.oracle);
  if (!rep.oracle) return rep;

  std::set<std::string> oracle_ids;
  for (const auto& [id, e] : rep.oracle->entries) oracle_ids.insert(id);
  if (oracle_ids != ids) throw Error("report: oracle candidates differ from the run's candidates");

  const Ranking oracle_rank = rep.oracle->ranking();
  for (std::size_t i = 0; i < rep.metrics.size(); ++i) {
    const MetricId m = rep.metrics[i];
    const Ranking& rank = rep.rankings[i];
    const auto ms = scores_of(rep.metric_scores, m);

    MatchResult match{m, top1_match(rank, oracle_rank), std::nullopt};
    if (ids.size() >= 3) match.top3 = top3_match(rank, oracle_rank);
    rep.matches.push_back(match);

    GapResult gap{m, rank.order.front(), 0.0, {}};
    for (const auto& choice : per_run_choices(ms, rep.n_runs)) {
      gap.per_run.push_back(performance_gap(choice, *rep.oracle));
    }
    // A random pick has no single choice; its gap is the expectation over runs.
    gap.gap = m == MetricId::random_baseline ? mean(gap.per_run)
                                             : performance_gap(gap.choice, *rep.oracle);
    rep.gaps.push_back(std::move(gap));

    if (m == MetricId::random_baseline) continue;
    std::vector<double> x, y;
    for (const auto& s : ms) {
      x.push_back(s.value);
      y.push_back(rep.oracle->entries.at(s.generator_id).f1);
    }
    CorrelationResult corr{m, std::nullopt, std::nullopt, std::nullopt, std::nullopt};
    try {
      const Correlation c = pearson(x, y);
      corr.pearson_r = c.r;
      corr.ci_low = c.ci_low;
      corr.ci_high = c.ci_high;
    } catch (const Error&) {
    }
    try {
      corr.kendall_tau_b = kendall_tau_b(x, y);
    } catch (const Error&) {
    }
    rep.correlations.push_back(corr);
  }

  if (const GapResult* random = find_metric(rep.gaps, MetricId::random_baseline)) {
    for (const auto& g : rep.gaps) {
      if (g.metric_id == MetricId::random_baseline) continue;
      const MannWhitney mw = mann_whitney_u(g.per_run, random->per_run);
      rep.significance.push_back({g.metric_id, mw.u, mw.p_two_sided, mw.exact});
    }
  }
  return rep;
}

std::string_view to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::json_lines: return "json-lines";
    case ReportFormat::csv_tables: return "csv-tables";
    case ReportFormat::markdown_tables: return "markdown-tables";
  }
  return "?";
}

ReportFormat report_format_from_string(std::string_view s) {
  for (auto f : {ReportFormat::json_lines, ReportFormat::csv_tables, ReportFormat::markdown_tables}) {
    if (s == to_string(f)) return f;
  }
  throw Error("unknown report format '" + std::string(s) + "'");
}

std::string report_to_jsonl(const RunReport& rep) {
  std::string out;
  auto emit = [&](const json& j) { out += j.dump() + "\n"; };

  json metrics = json::array();
  for (MetricId m : rep.metrics) metrics.push_back(std::string(to_string(m)));
  emit({{"kind", "header"},
        {"manifest_hash", rep.manifest_hash},
        {"run_id", rep.run_id()},
        {"task", rep.task},
        {"language", rep.language},
        {"generation_setup", rep.generation_setup},
        {"n_runs", rep.n_runs},
        {"metrics", metrics},
        {"oracle_absent", rep.oracle_absent()}});
  emit({{"kind", "provenance"}, {"entries", rep.provenance}});
  for (const auto& c : rep.candidates) {
    emit({{"kind", "candidate"},
          {"generator_id", c.generator_id},
          {"param_count", c.param_count},
          {"display_name", c.display_name}});
  }
  for (const auto& s : rep.metric_scores) {
    emit({{"kind", "metric_score"},
          {"metric", to_string(s.metric_id)},
          {"generator_id", s.generator_id},
          {"value", s.value},
          {"per_run_values", s.per_run_values}});
  }
  for (const auto& r : rep.rankings) {
    emit({{"kind", "ranking"}, {"metric", to_string(r.metric_id)}, {"order", r.order}, {"scores", r.scores}});
  }
  for (const auto& c : rep.rose_cells) {
    emit({{"kind", "rose_cell"},
          {"trained_on", c.trained_on},
          {"evaluated_on", c.evaluated_on},
          {"run", c.run_index},
          {"f1", c.f1}});
  }
  if (rep.oracle) {
    for (const auto& [id, e] : rep.oracle->entries) {
      emit({{"kind", "oracle"}, {"generator_id", id}, {"f1", e.f1}, {"per_run", e.per_run}});
    }
  }
  for (const auto& m : rep.matches) {
    json j = {{"kind", "match"}, {"metric", to_string(m.metric_id)}, {"top1", m.top1}};
    j["top3"] = m.top3 ? json(*m.top3) : json(nullptr);
    emit(j);
  }
  for (const auto& g : rep.gaps) {
    emit({{"kind", "gap"},
          {"metric", to_string(g.metric_id)},
          {"choice", g.choice},
          {"gap", g.gap},
          {"per_run", g.per_run}});
  }
  for (const auto& c : rep.correlations) {
    emit({{"kind", "correlation"},
          {"metric", to_string(c.metric_id)},
          {"pearson_r", opt_json(c.pearson_r)},
          {"ci_low", opt_json(c.ci_low)},
          {"ci_high", opt_json(c.ci_high)},
          {"ci_method", "fisher-z"},
          {"kendall_tau_b", opt_json(c.kendall_tau_b)}});
  }
  for (const auto& s : rep.significance) {
    emit({{"kind", "significance"},
          {"metric", to_string(s.metric_id)},
          {"versus", "random_baseline"},
          {"u", s.u},
          {"p_two_sided", s.p_two_sided},
          {"exact", s.exact}});
  }
  return out;
}

RunReport report_from_jsonl(std::istream& in) {
  RunReport rep;
  bool seen_header = false, oracle_absent = true;
  std::string line;
  std::size_t line_no = 0;
  auto metric = [](const json& j) { return metric_from_string(j.at("metric").get<std::string>()); };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        seen_header = true;
        rep.manifest_hash = j.at("manifest_hash").get<std::string>();
        rep.task = j.at("task").get<std::string>();
        rep.language = j.at("language").get<std::string>();
        rep.generation_setup = j.at("generation_setup").get<std::string>();
        rep.n_runs = j.at("n_runs").get<std::size_t>();
        for (const auto& m : j.at("metrics")) rep.metrics.push_back(metric_from_string(m.get<std::string>()));
        oracle_absent = j.at("oracle_absent").get<bool>();
        if (!oracle_absent) rep.oracle.emplace();
      } else if (kind == "provenance") {
        rep.provenance = j.at("entries").get<std::map<std::string, std::string>>();
      } else if (kind == "candidate") {
        rep.candidates.push_back({j.at("generator_id").get<std::string>(),
                                  j.at("param_count").get<std::uint64_t>(),
                                  j.at("display_name").get<std::string>()});
      } else if (kind == "metric_score") {
        rep.metric_scores.push_back({metric(j), j.at("generator_id").get<std::string>(),
                                     j.at("value").get<double>(),
                                     j.at("per_run_values").get<std::vector<double>>()});
      } else if (kind == "ranking") {
        rep.rankings.push_back({metric(j), j.at("order").get<std::vector<std::string>>(),
                                j.at("scores").get<std::map<std::string, double>>()});
      } else if (kind == "rose_cell") {
        rep.rose_cells.push_back({j.at("trained_on").get<std::string>(),
                                  j.at("evaluated_on").get<std::string>(),
                                  j.at("run").get<std::size_t>(), j.at("f1").get<double>()});
      } else if (kind == "oracle") {
        if (!rep.oracle) throw Error("oracle record in a report flagged oracle_absent");
        rep.oracle->entries[j.at("generator_id").get<std::string>()] = {
            j.at("f1").get<double>(), j.at("per_run").get<std::vector<double>>()};
      } else if (kind == "match") {
        MatchResult m{metric(j), j.at("top1").get<bool>(), std::nullopt};
        if (!j.at("top3").is_null()) m.top3 = j.at("top3").get<bool>();
        rep.matches.push_back(m);
      } else if (kind == "gap") {
        rep.gaps.push_back({metric(j), j.at("choice").get<std::string>(), j.at("gap").get<double>(),
                            j.at("per_run").get<std::vector<double>>()});
      } else if (kind == "correlation") {
        rep.correlations.push_back({metric(j), opt_double(j, "pearson_r"), opt_double(j, "ci_low"),
                                    opt_double(j, "ci_high"), opt_double(j, "kendall_tau_b")});
      } else if (kind == "significance") {
        rep.significance.push_back({metric(j), j.at("u").get<double>(),
                                    j.at("p_two_sided").get<double>(), j.at("exact").get<bool>()});
      } else {
        throw Error("unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw Error("report line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("report line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!seen_header) throw Error("report has no header record");
  return rep;
}

RunReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report '" + path.string() + "'");
  return report_from_jsonl(in);
}

std::map<std::string, std::string> render_report(const RunReport& rep, ReportFormat format) {
  std::map<std::string, std::string> out;
  if (format == ReportFormat::json_lines) {
    out["report"] = report_to_jsonl(rep);
    return out;
  }

  if (format == ReportFormat::csv_tables) {
    std::string run = csv_line({"key", "value"});
    run += csv_line({"manifest_hash", rep.manifest_hash});
    run += csv_line({"task", rep.task});
    run += csv_line({"language", rep.language});
    run += csv_line({"generation_setup", rep.generation_setup});
    run += csv_line({"n_runs", std::to_string(rep.n_runs)});
    run += csv_line({"oracle_absent", rep.oracle_absent() ? "true" : "false"});
    for (const auto& [k, v] : rep.provenance) run += csv_line({"provenance." + k, v});
    out["run"] = run;

    std::string scores = csv_line({"metric", "generator_id", "value", "per_run_values"});
    for (const auto& s : rep.metric_scores) {
      std::string runs;
      for (std::size_t i = 0; i < s.per_run_values.size(); ++i) {
        if (i) runs.push_back(';');
        runs += format_number(s.per_run_values[i]);
      }
      scores += csv_line({std::string(to_string(s.metric_id)), s.generator_id, format_number(s.value), runs});
    }
    out["scores"] = scores;

    std::string rankings = csv_line({"metric", "rank", "generator_id", "value"});
    for (const auto& r : rep.rankings) {
      for (std::size_t i = 0; i < r.order.size(); ++i) {
        rankings += csv_line({std::string(to_string(r.metric_id)), std::to_string(i + 1), r.order[i],
                              format_number(r.scores.at(r.order[i]))});
      }
    }
    out["rankings"] = rankings;

    std::string cells = csv_line({"trained_on", "evaluated_on", "run", "f1"});
    for (const auto& c : rep.rose_cells) {
      cells += csv_line({c.trained_on, c.evaluated_on, std::to_string(c.run_index), format_number(c.f1)});
    }
    out["cells"] = cells;

    if (!rep.oracle) return out;
    std::string oracle = csv_line({"generator_id", "f1"});
    for (const auto& [id, e] : rep.oracle->entries) oracle += csv_line({id, format_number(e.f1)});
    out["oracle"] = oracle;

    std::string matches = csv_line({"metric", "top1", "top3"});
    for (const auto& m : rep.matches) {
      matches += csv_line({std::string(to_string(m.metric_id)), m.top1 ? "true" : "false",
                           m.top3 ? (*m.top3 ? "true" : "false") : ""});
    }
    out["matches"] = matches;

    std::string gaps = csv_line({"metric", "choice", "gap_pp"});
    for (const auto& g : rep.gaps) {
      gaps += csv_line({std::string(to_string(g.metric_id)), g.choice, format_number(g.gap)});
    }
    out["gaps"] = gaps;

    std::string corr = csv_line({"metric", "pearson_r", "ci_low", "ci_high", "kendall_tau_b"});
    for (const auto& c : rep.correlations) {
      corr += csv_line({std::string(to_string(c.metric_id)), opt_num(c.pearson_r), opt_num(c.ci_low),
                        opt_num(c.ci_high), opt_num(c.kendall_tau_b)});
    }
    out["correlations"] = corr;

    std::string sig = csv_line({"metric", "versus", "u", "p_two_sided", "exact"});
    for (const auto& s : rep.significance) {
      sig += csv_line({std::string(to_string(s.metric_id)), "random_baseline", format_number(s.u),
                       format_number(s.p_two_sided), s.exact ? "true" : "false"});
    }
    out["significance"] = sig;
    return out;
  }

  // markdown-tables
  std::vector<std::string> head{"metric"};
  for (const auto& c : rep.candidates) head.push_back(c.generator_id);
  std::string scores = md_header(head);
  for (MetricId m : rep.metrics) {
    std::vector<std::string> row{std::string(to_string(m))};
    for (const auto& c : rep.candidates) {
      for (const auto& s : rep.metric_scores) {
        if (s.metric_id == m && s.generator_id == c.generator_id) row.push_back(fixed4(s.value));
      }
    }
    scores += md_row(row);
  }
  if (rep.oracle) {
    std::vector<std::string> row{"oracle_f1"};
    for (const auto& c : rep.candidates) row.push_back(fixed4(rep.oracle->entries.at(c.generator_id).f1));
    scores += md_row(row);
  }
  out["scores"] = scores;

  std::string sel;
  if (rep.oracle) {
    sel = md_header({"metric", "choice", "top1", "top3", "gap_pp", "pearson_r", "kendall_tau_b",
                     "p_vs_random"});
    for (std::size_t i = 0; i < rep.metrics.size(); ++i) {
      const MetricId m = rep.metrics[i];
      const auto* match = find_metric(rep.matches, m);
      const auto* gap = find_metric(rep.gaps, m);
      const auto* corr = find_metric(rep.correlations, m);
      const auto* sig = find_metric(rep.significance, m);
      sel += md_row({std::string(to_string(m)), gap->choice, yes_no(match->top1),
                     match->top3 ? yes_no(*match->top3) : "-", fixed4(gap->gap),
                     corr ? opt_fixed(corr->pearson_r) : "-",
                     corr ? opt_fixed(corr->kendall_tau_b) : "-",
                     sig ? fixed4(sig->p_two_sided) : "-"});
    }
  } else {
    sel = "oracle_absent: no human test data; rankings only.\n\n";
    sel += md_header({"metric", "choice", "ranking"});
    for (const auto& r : rep.rankings) {
      std::string order;
      for (const auto& id : r.order) order += (order.empty() ? "" : " > ") + id;
      sel += md_row({std::string(to_string(r.metric_id)), r.order.front(), order});
    }
  }
  out["selection"] = sel;

  if (!rep.rose_cells.empty()) {
    // Mean F1 over runs: rows trained on, columns evaluated on.
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
    for (const auto& c : rep.rose_cells) {
      auto& a = acc[{c.trained_on, c.evaluated_on}];
      a.first += c.f1;
      a.second += 1;
    }
    std::vector<std::string> h{"trained_on \\ evaluated_on"};
    for (const auto& c : rep.candidates) h.push_back(c.generator_id);
    std::string cells = md_header(h);
    for (const auto& tr : rep.candidates) {
      std::vector<std::string> row{tr.generator_id};
      for (const auto& ev : rep.candidates) {
        auto it = acc.find({tr.generator_id, ev.generator_id});
        row.push_back(it == acc.end() ? "-" : fixed4(it->second.first / static_cast<double>(it->second.second)));
      }
      cells += md_row(row);
    }
    out["cells"] = cells;
  }
  return out;
}

std::filesystem::path write_report(const RunReport& rep, const std::filesystem::path& out_dir,
                                   ReportFormat format) {
  const std::string ext = format == ReportFormat::json_lines   ? "jsonl"
                          : format == ReportFormat::csv_tables ? "csv"
                                                               : "md";
  const auto dir = out_dir / rep.run_id();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  for (const auto& [name, body] : render_report(rep, format)) {
    const auto path = dir / (name + "." + ext);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << body;
    if (!f) throw Error("cannot write '" + path.string() + "'");
  }
  return dir;
}

Aggregate aggregate_reports(std::span<const RunReport> reports, std::size_t bootstrap_resamples,
                            std::uint64_t rng_seed) {
  Aggregate agg;
  agg.n_reports = reports.size();
  std::set<std::string> tasks, languages;
  std::set<MetricId> metrics;
  for (const auto& r : reports) {
    tasks.insert(r.task);
    languages.insert(r.language);
    metrics.insert(r.metrics.begin(), r.metrics.end());
  }
  agg.tasks.assign(tasks.begin(), tasks.end());
  agg.languages.assign(languages.begin(), languages.end());

  std::map<MetricId, std::vector<double>> case_gaps;
  for (MetricId m : kAllMetrics) {
    if (!metrics.contains(m)) continue;
    AggregateRow row;
    row.metric_id = m;
    std::map<std::string, std::vector<double>> by_task, by_language;
    std::vector<double> rs, taus, pooled_x, pooled_y;
    for (const auto& r : reports) {
      if (!r.oracle) continue;
      const auto* gap = find_metric(r.gaps, m);
      if (!gap) continue;
      const auto* match = find_metric(r.matches, m);
      ++row.n_cases;
      row.top1_count += match->top1;
      if (match->top3) {
        ++row.top3_cases;
        row.top3_count += *match->top3;
      }
      case_gaps[m].push_back(gap->gap);
      by_task[r.task].push_back(gap->gap);
      by_language[r.language].push_back(gap->gap);
      if (const auto* c = find_metric(r.correlations, m)) {
        if (c->pearson_r) rs.push_back(*c->pearson_r);
        if (c->kendall_tau_b) taus.push_back(*c->kendall_tau_b);
      }
      if (m != MetricId::random_baseline) {
        for (const auto& s : r.metric_scores) {
          if (s.metric_id != m) continue;
          pooled_x.push_back(s.value);
          pooled_y.push_back(r.oracle->entries.at(s.generator_id).f1);
        }
      }
    }
    if (row.n_cases > 0) row.mean_gap = mean(case_gaps[m]);
    for (const auto& [k, v] : by_task) row.mean_gap_by_task[k] = mean(v);
    for (const auto& [k, v] : by_language) row.mean_gap_by_language[k] = mean(v);
    if (!rs.empty()) {
      row.mean_pearson = mean(rs);
      if (rs.size() >= 2) {
        const auto [lo, hi] = bootstrap_ci(
            rs, bootstrap_resamples, SeedBuilder(rng_seed).add("aggregate").add(to_string(m)).seed());
        row.mean_pearson_low = lo;
        row.mean_pearson_high = hi;
      }
    }
    if (!taus.empty()) row.mean_kendall = mean(taus);
    try {
      if (!pooled_x.empty()) row.pooled_pearson = pearson(pooled_x, pooled_y).r;
    } catch (const Error&) {
    }
    agg.rows.push_back(std::move(row));
  }
  const auto random = case_gaps.find(MetricId::random_baseline);
  if (random != case_gaps.end() && !random->second.empty()) {
    for (auto& row : agg.rows) {
      if (row.metric_id == MetricId::random_baseline || case_gaps[row.metric_id].empty()) continue;
      const MannWhitney mw = mann_whitney_u(case_gaps[row.metric_id], random->second);
      row.vs_random = SignificanceResult{row.metric_id, mw.u, mw.p_two_sided, mw.exact};
    }
  }
  return agg;
}

std::map<std::string, std::string> render_aggregate(const Aggregate& agg, ReportFormat format) {
  std::map<std::string, std::string> out;
  if (format == ReportFormat::json_lines) {
    std::string s = json({{"kind", "aggregate_header"},
                          {"n_reports", agg.n_reports},
                          {"tasks", agg.tasks},
                          {"languages", agg.languages}})
                        .dump() +
                    "\n";
    for (const auto& r : agg.rows) {
      json j = {{"kind", "aggregate_row"},
                {"metric", to_string(r.metric_id)},
                {"n_cases", r.n_cases},
                {"top1_count", r.top1_count},
                {"top3_count", r.top3_count},
                {"top3_cases", r.top3_cases},
                {"mean_gap", r.mean_gap},
                {"mean_gap_by_task", r.mean_gap_by_task},
                {"mean_gap_by_language", r.mean_gap_by_language},
                {"mean_pearson", opt_json(r.mean_pearson)},
                {"mean_pearson_low", opt_json(r.mean_pearson_low)},
                {"mean_pearson_high", opt_json(r.mean_pearson_high)},
                {"mean_pearson_ci_method", "percentile-bootstrap"},
                {"mean_kendall_tau_b", opt_json(r.mean_kendall)},
                {"pooled_pearson", opt_json(r.pooled_pearson)}};
      if (r.vs_random) {
        j["vs_random"] = {{"u", r.vs_random->u},
                          {"p_two_sided", r.vs_random->p_two_sided},
                          {"exact", r.vs_random->exact}};
      } else {
        j["vs_random"] = nullptr;
      }
      s += j.dump() + "\n";
    }
    out["aggregate"] = s;
    return out;
  }

  const bool csv = format == ReportFormat::csv_tables;
  auto row = [&](const std::vector<std::string>& cells) {
    if (!csv) return md_row(cells);
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + csv_field(cells[i]);
    return line + "\n";
  };
  auto header = [&](const std::vector<std::string>& cells) { return csv ? row(cells) : md_header(cells); };
  auto num = [&](double v) { return csv ? format_number(v) : fixed4(v); };
  auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : (csv ? "" : "-"); };

  std::string t1 = header({"metric_id", "top1_count", "top3_count", "n_cases"});
  for (const auto& r : agg.rows) {
    t1 += row({std::string(to_string(r.metric_id)), std::to_string(r.top1_count),
               std::to_string(r.top3_count), std::to_string(r.n_cases)});
  }
  out["table1"] = t1;

  auto gap_table = [&](const std::vector<std::string>& keys, auto member) {
    std::vector<std::string> h{"metric_id"};
    h.insert(h.end(), keys.begin(), keys.end());
    h.push_back("mean");
    std::string t = header(h);
    for (const auto& r : agg.rows) {
      std::vector<std::string> cells{std::string(to_string(r.metric_id))};
      const auto& m = r.*member;
      for (const auto& k : keys) {
        auto it = m.find(k);
        cells.push_back(it == m.end() ? (csv ? "" : "-") : num(it->second));
      }
      cells.push_back(r.n_cases ? num(r.mean_gap) : (csv ? "" : "-"));
      t += row(cells);
    }
    return t;
  };
  out["gaps_by_task"] = gap_table(agg.tasks, &AggregateRow::mean_gap_by_task);
  out["gaps_by_language"] = gap_table(agg.languages, &AggregateRow::mean_gap_by_language);

  std::string corr = header({"metric_id", "mean_pearson", "ci_low", "ci_high", "mean_kendall_tau_b",
                             "pooled_pearson"});
  for (const auto& r : agg.rows) {
    if (r.metric_id == MetricId::random_baseline) continue;
    corr += row({std::string(to_string(r.metric_id)), opt(r.mean_pearson), opt(r.mean_pearson_low),
                 opt(r.mean_pearson_high), opt(r.mean_kendall), opt(r.pooled_pearson)});
  }
  out["correlations"] = corr;

  std::string sig = header({"metric_id", "u", "p_two_sided", "exact"});
  for (const auto& r : agg.rows) {
    if (!r.vs_random) continue;
    sig += row({std::string(to_string(r.metric_id)), num(r.vs_random->u), num(r.vs_random->p_two_sided),
                r.vs_random->exact ? "true" : "false"});
  }
  out["significance"] = sig;
  return out;
}

}  // namespace rose
