#include "rose/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "rose/hashing.hpp"
#include "rose/unicode.hpp"

namespace rose {

using nlohmann::json;

std::string Diagnostic::to_string() const {
  std::string out = file;
  if (line > 0) out += ":" + std::to_string(line);
  if (!out.empty()) out += ": ";
  return out + message;
}

namespace {

std::string join_messages(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "\n";
    out += d.to_string();
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Diagnostic> diagnostics)
    : Error(join_messages(diagnostics)), diagnostics_(std::move(diagnostics)) {}

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw Error("label set needs at least 2 labels");
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw Error("label set contains an empty label");
    if (!seen.insert(l).second) throw Error("duplicate label '" + l + "' in label set");
  }
}

bool LabelSet::contains(std::string_view label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t LabelSet::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw Error("unknown label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::synthetic_train: return "synthetic-train";
    case Split::synthetic_test: return "synthetic-test";
    case Split::human_train: return "human-train";
    case Split::human_test: return "human-test";
  }
  return "synthetic-train";
}

Split split_from_string(std::string_view s) {
  for (Split split : {Split::synthetic_train, Split::synthetic_test, Split::human_train,
                      Split::human_test}) {
    if (to_string(split) == s) return split;
  }
  throw Error("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(ValidSource source) {
  return source == ValidSource::n_requested ? "n_requested" : "dedup_fallback";
}

Dataset parse_dataset(std::istream& in, const LabelSet& expected_labels,
                      const std::string& source_name) {
  Dataset dataset;
  dataset.labels = expected_labels;
  std::vector<Diagnostic> errors;
  std::unordered_map<std::string, std::size_t> id_line;

  auto fail = [&](std::size_t line, std::string message) {
    errors.push_back({source_name, line, std::move(message)});
  };

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;

    json record;
    try {
      record = json::parse(raw);
    } catch (const json::parse_error& e) {
      fail(line_no, std::string("malformed record: ") + e.what());
      continue;
    }
    if (!record.is_object()) {
      fail(line_no, "malformed record: expected a JSON object");
      continue;
    }

    Sample sample;
    bool ok = true;
    for (const char* key : {"id", "text", "label"}) {
      auto it = record.find(key);
      if (it == record.end() || !it->is_string()) {
        fail(line_no, std::string("malformed record: missing string field \"") + key + "\"");
        ok = false;
      }
    }
    if (!ok) continue;
    sample.id = record["id"].get<std::string>();
    sample.text = record["text"].get<std::string>();
    sample.label = record["label"].get<std::string>();

    if (sample.id.empty()) {
      fail(line_no, "malformed record: empty id");
      ok = false;
    }
    if (!expected_labels.contains(sample.label)) {
      fail(line_no, "unknown label '" + sample.label + "'");
      ok = false;
    }
    if (auto it = record.find("embedding"); it != record.end()) {
      if (!it->is_array()) {
        fail(line_no, "malformed record: \"embedding\" must be an array of numbers");
        ok = false;
      } else {
        std::vector<double> v;
        v.reserve(it->size());
        for (const auto& x : *it) {
          if (!x.is_number()) {
            fail(line_no, "malformed record: \"embedding\" must be an array of numbers");
            ok = false;
            break;
          }
          v.push_back(x.get<double>());
        }
        sample.embedding = std::move(v);
      }
    }
    if (auto it = record.find("tokens"); it != record.end()) {
      std::vector<std::string> tokens;
      bool good = it->is_array();
      if (good) {
        for (const auto& t : *it) {
          if (!t.is_string() || t.get_ref<const std::string&>().empty()) {
            good = false;
            break;
          }
          tokens.push_back(t.get<std::string>());
        }
      }
      if (!good) {
        fail(line_no, "malformed record: \"tokens\" must be an array of non-empty strings");
        ok = false;
      }
      sample.tokens = std::move(tokens);
    }
    if (auto it = record.find("meta"); it != record.end()) {
      if (!it->is_object()) {
        fail(line_no, "malformed record: \"meta\" must be a string map");
        ok = false;
      } else {
        for (const auto& [k, v] : it->items()) {
          if (!v.is_string()) {
            fail(line_no, "malformed record: \"meta\" must be a string map");
            ok = false;
            break;
          }
          sample.meta[k] = v.get<std::string>();
        }
      }
    }

    if (!sample.id.empty()) {
      auto [pos, inserted] = id_line.emplace(sample.id, line_no);
      if (!inserted) {
        fail(line_no, "duplicate id '" + sample.id + "' on lines " +
                          std::to_string(pos->second) + " and " + std::to_string(line_no));
        ok = false;
      }
    }
    if (ok) dataset.samples.push_back(std::move(sample));
  }

  if (!dataset.samples.empty()) {
    // Embedding dimension must agree within the file.
    std::optional<std::size_t> dim;
    for (const auto& s : dataset.samples) {
      if (!s.embedding) continue;
      if (!dim) dim = s.embedding->size();
      if (s.embedding->size() != *dim) {
        errors.push_back({source_name, id_line[s.id],
                          "embedding dimension " + std::to_string(s.embedding->size()) +
                              " differs from " + std::to_string(*dim)});
      }
    }
  }

  if (!errors.empty()) throw ValidationError(std::move(errors));
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path, const LabelSet& expected_labels) {
  std::ifstream in(path);
  if (!in) throw ValidationError({{path.string(), 0, "cannot open dataset file"}});
  return parse_dataset(in, expected_labels, path.string());
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  for (const auto& s : dataset.samples) {
    json record = {{"id", s.id}, {"text", s.text}, {"label", s.label}};
    if (s.embedding) record["embedding"] = *s.embedding;
    if (s.tokens) record["tokens"] = *s.tokens;
    if (!s.meta.empty()) record["meta"] = s.meta;
    out << record.dump() << '\n';
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset file " + path.string());
  write_dataset(dataset, out);
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char32_t c : unicode::decode_utf8(text)) {
    if (unicode::is_whitespace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (unicode::is_punctuation(c)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    unicode::append_utf8(out, unicode::fold_case(c));
  }
  return out;
}

std::vector<std::size_t> label_counts(const Dataset& dataset) {
  std::vector<std::size_t> counts(dataset.labels.size(), 0);
  for (const auto& s : dataset.samples) ++counts[dataset.labels.index_of(s.label)];
  return counts;
}

namespace {

// Positions of each label's samples, in input order.
std::vector<std::vector<std::size_t>> positions_by_label(const Dataset& dataset) {
  std::vector<std::vector<std::size_t>> pos(dataset.labels.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    pos[dataset.labels.index_of(dataset.samples[i].label)].push_back(i);
  }
  return pos;
}

Dataset with_samples(const Dataset& like, std::vector<Sample> samples) {
  Dataset out;
  out.generator_id = like.generator_id;
  out.task = like.task;
  out.language = like.language;
  out.split = like.split;
  out.labels = like.labels;
  out.samples = std::move(samples);
  return out;
}

}  // namespace

Dataset balance_by_label(const Dataset& dataset, std::uint64_t rng_seed) {
  const auto pos = positions_by_label(dataset);
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (std::size_t l = 0; l < pos.size(); ++l) {
    if (pos[l].empty()) throw Error("label '" + dataset.labels[l] + "' has no samples");
    m = std::min(m, pos[l].size());
  }

  Rng rng(rng_seed);
  std::vector<char> keep(dataset.samples.size(), 0);
  for (const auto& p : pos) {
    for (std::size_t k : rng.sample_indices(p.size(), m)) keep[p[k]] = 1;
  }
  std::vector<Sample> samples;
  samples.reserve(m * pos.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    if (keep[i]) samples.push_back(dataset.samples[i]);
  }
  Dataset out = with_samples(dataset, std::move(samples));
  out.n_requested = dataset.n_requested;
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t rng_seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error("test fraction must lie in (0, 1)");
  }
  const auto pos = positions_by_label(dataset);
  Rng rng(rng_seed);
  std::vector<char> to_test(dataset.samples.size(), 0);
  for (std::size_t l = 0; l < pos.size(); ++l) {
    if (pos[l].size() < 2) {
      throw Error("label '" + dataset.labels[l] + "' has fewer than 2 samples; cannot split");
    }
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(pos[l].size())));
    for (std::size_t k : rng.sample_indices(pos[l].size(), n_test)) to_test[pos[l][k]] = 1;
  }
  std::vector<Sample> train, test;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    (to_test[i] ? test : train).push_back(dataset.samples[i]);
  }
  return {with_samples(dataset, std::move(train)), with_samples(dataset, std::move(test))};
}

ValidFraction valid_fraction(const Dataset& dataset) {
  if (dataset.n_requested) {
    if (*dataset.n_requested == 0) throw Error("n_requested is 0");
    if (*dataset.n_requested < dataset.samples.size()) {
      throw Error("n_requested (" + std::to_string(*dataset.n_requested) +
                  ") is smaller than the number of retained samples (" +
                  std::to_string(dataset.samples.size()) + ")");
    }
    return {static_cast<double>(dataset.samples.size()) /
                static_cast<double>(*dataset.n_requested),
            ValidSource::n_requested};
  }
  if (dataset.samples.empty()) return {0.0, ValidSource::dedup_fallback};

  std::set<std::pair<std::string, std::string>> seen;
  std::size_t valid = 0;
  for (const auto& s : dataset.samples) {
    std::string norm = normalize_text(s.text);
    if (norm.empty()) continue;
    if (seen.emplace(s.label, std::move(norm)).second) ++valid;
  }
  return {static_cast<double>(valid) / static_cast<double>(dataset.samples.size()),
          ValidSource::dedup_fallback};
}

std::uint64_t fingerprint(const Dataset& dataset) {
  std::uint64_t h = fnv1a64("dataset");
  for (const auto& s : dataset.samples) {
    h = hash_combine(h, fnv1a64(s.id));
    h = hash_combine(h, fnv1a64(s.text));
    h = hash_combine(h, fnv1a64(s.label));
    if (s.tokens) {
      for (const auto& t : *s.tokens) h = hash_combine(h, fnv1a64(t));
    }
  }
  return h;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (!(a.labels == b.labels)) throw Error("cannot concatenate datasets with different label sets");
  std::vector<Sample> samples = a.samples;
  samples.insert(samples.end(), b.samples.begin(), b.samples.end());
  Dataset out = with_samples(a, std::move(samples));
  out.n_requested = a.n_requested;
  return out;
}

}  // namespace rose
