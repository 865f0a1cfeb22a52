#include "rose/textfeat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "rose/hashing.hpp"
#include "rose/unicode.hpp"

namespace rose {

namespace {

constexpr std::uint64_t kUnigramSalt = 0x5ca1ab1e00000001ULL;
constexpr std::uint64_t kBigramSalt = 0x5ca1ab1e00000002ULL;
constexpr std::string_view kEmptyFeature = "\x01<empty>";

std::uint64_t unigram_key(const std::string& token) {
  return mix64(fnv1a64(token) ^ kUnigramSalt);
}

std::uint64_t bigram_key(const std::string& a, const std::string& b) {
  std::string joined;
  joined.reserve(a.size() + b.size() + 1);
  joined.append(a).push_back('\x1f');
  joined.append(b);
  return mix64(fnv1a64(joined) ^ kBigramSalt);
}

void flush_run(std::u32string& run, TokenSequence& out) {
  if (run.empty()) return;
  const bool split_chars =
      std::any_of(run.begin(), run.end(), unicode::is_undelimited_script);
  if (!split_chars) {
    out.push_back(unicode::encode_utf8(run));
  } else {
    std::string current;
    for (char32_t c : run) {
      if (!current.empty() && !unicode::is_mark(c)) {
        out.push_back(std::move(current));
        current.clear();
      }
      unicode::append_utf8(current, c);
    }
    if (!current.empty()) out.push_back(std::move(current));
  }
  run.clear();
}

}  // namespace

TokenSequence tokenize(std::string_view normalized_text) {
  TokenSequence out;
  std::u32string run;
  for (char32_t c : unicode::decode_utf8(normalized_text)) {
    if (unicode::is_letter_or_digit(c)) {
      run.push_back(c);
    } else {
      flush_run(run, out);
    }
  }
  flush_run(run, out);
  return out;
}

TokenSequence sample_tokens(const Sample& sample) {
  if (sample.tokens) return *sample.tokens;
  return tokenize(normalize_text(sample.text));
}

std::vector<Bigram> bigrams(const TokenSequence& tokens) {
  std::vector<Bigram> out;
  if (tokens.size() < 2) return out;
  out.reserve(tokens.size() - 1);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.emplace_back(tokens[i], tokens[i + 1]);
  return out;
}

SparseVector hash_features(const TokenSequence& tokens, std::uint32_t n_buckets) {
  if (n_buckets < 2) throw Error("hash_features: n_buckets must be >= 2");
  std::map<std::uint32_t, double> acc;
  auto add = [&](std::uint64_t key) {
    const auto bucket = static_cast<std::uint32_t>(key % n_buckets);
    acc[bucket] += (key >> 63) ? -1.0 : 1.0;
  };
  for (const auto& t : tokens) add(unigram_key(t));
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) add(bigram_key(tokens[i], tokens[i + 1]));

  SparseVector out;
  for (const auto& [bucket, v] : acc) {
    if (v == 0.0) continue;
    out.index.push_back(bucket);
    out.value.push_back(v);
  }
  return out;
}

std::string_view to_string(EmbeddingProvider provider) {
  return provider == EmbeddingProvider::external_file ? "external-file" : "builtin-hash";
}

EmbeddingProvider embedding_provider_from_string(std::string_view s) {
  if (s == "external-file") return EmbeddingProvider::external_file;
  if (s == "builtin-hash") return EmbeddingProvider::builtin_hash;
  throw Error("unknown embedding provider '" + std::string(s) + "'");
}

const std::vector<double>& EmbeddingTable::at(const std::string& id) const {
  auto it = vectors.find(id);
  if (it == vectors.end()) throw Error("no embedding for sample id '" + id + "'");
  return it->second;
}

std::unordered_map<std::string, std::vector<double>> load_embedding_file(
    const std::filesystem::path& path, std::size_t* dim_out) {
  std::ifstream in(path);
  if (!in) throw ValidationError({{path.string(), 0, "cannot open embedding file"}});

  std::unordered_map<std::string, std::vector<double>> vectors;
  std::vector<Diagnostic> errors;
  std::optional<std::size_t> dim;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](std::string msg) { errors.push_back({path.string(), line_no, std::move(msg)}); };
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed record: ") + e.what());
      continue;
    }
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string() ||
        !record.contains("vector") || !record["vector"].is_array()) {
      fail("malformed record: expected {\"id\": string, \"vector\": [numbers]}");
      continue;
    }
    std::vector<double> v;
    bool ok = true;
    for (const auto& x : record["vector"]) {
      if (!x.is_number()) {
        ok = false;
        break;
      }
      v.push_back(x.get<double>());
    }
    if (!ok) {
      fail("malformed record: vector must contain only numbers");
      continue;
    }
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      fail("non-finite value in vector");
      continue;
    }
    if (v.empty()) {
      fail("empty vector");
      continue;
    }
    if (!dim) dim = v.size();
    if (v.size() != *dim) {
      fail("dimension mismatch: " + std::to_string(v.size()) + " != " + std::to_string(*dim));
      continue;
    }
    const std::string id = record["id"].get<std::string>();
    if (!vectors.emplace(id, std::move(v)).second) fail("duplicate id '" + id + "'");
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  if (dim_out) *dim_out = dim.value_or(0);
  return vectors;
}

std::vector<double> builtin_embedding(const TokenSequence& tokens, std::uint32_t dim) {
  if (dim < 2) throw Error("builtin embedding dimension must be >= 2");
  std::map<std::uint64_t, std::size_t> counts;
  for (const auto& t : tokens) ++counts[unigram_key(t)];
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) ++counts[bigram_key(tokens[i], tokens[i + 1])];
  if (counts.empty()) ++counts[unigram_key(std::string(kEmptyFeature))];

  auto project = [&](const std::map<std::uint64_t, std::size_t>& features) {
    std::vector<double> v(dim, 0.0);
    for (const auto& [key, count] : features) {
      // Sublinear term frequency.
      const double tf = 1.0 + std::log(static_cast<double>(count));
      v[key % dim] += (key >> 63) ? -tf : tf;
    }
    return v;
  };
  std::vector<double> v = project(counts);
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 == 0.0) {
    // Every bucket cancelled; fall back to the empty-text direction.
    v = project({{unigram_key(std::string(kEmptyFeature)), 1}});
    norm2 = 1.0;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

EmbeddingTable embed_dataset(const Dataset& dataset, const EmbeddingConfig& config) {
  EmbeddingTable table;
  table.provider = config.provider;

  if (config.provider == EmbeddingProvider::builtin_hash) {
    table.dim = config.dim;
    for (const auto& s : dataset.samples) {
      table.vectors.emplace(s.id, builtin_embedding(sample_tokens(s), config.dim));
    }
    return table;
  }

  std::vector<Diagnostic> errors;
  auto check = [&](const std::string& id, const std::vector<double>& v) {
    if (table.dim == 0) table.dim = v.size();
    if (v.size() != table.dim) {
      errors.push_back({"", 0, "embedding for id '" + id + "' has dimension " +
                                   std::to_string(v.size()) + ", expected " +
                                   std::to_string(table.dim)});
      return false;
    }
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      errors.push_back({"", 0, "embedding for id '" + id + "' has a non-finite value"});
      return false;
    }
    return true;
  };

  if (!config.path.empty()) {
    auto file = load_embedding_file(config.path, &table.dim);
    for (const auto& s : dataset.samples) {
      auto it = file.find(s.id);
      if (it == file.end()) {
        errors.push_back({config.path.string(), 0, "missing embedding for id '" + s.id + "'"});
        continue;
      }
      if (check(s.id, it->second)) table.vectors.emplace(s.id, it->second);
    }
  } else {
    for (const auto& s : dataset.samples) {
      if (!s.embedding) {
        errors.push_back({"", 0, "missing embedding for id '" + s.id + "'"});
        continue;
      }
      if (check(s.id, *s.embedding)) table.vectors.emplace(s.id, *s.embedding);
    }
  }
  if (!errors.empty()) throw ValidationError(std::move(errors));
  return table;
}

}  // namespace rose
