#include "rose/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rose {

using nlohmann::json;

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  void fail(const std::string& message) { diags_.push_back({source_, 0, message}); }
  std::vector<Diagnostic>& diagnostics() { return diags_; }

  void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        fail("unknown key '" + key + "' in " + where);
      }
    }
  }

  template <class T>
  std::optional<T> get(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    bool ok = true;
    if constexpr (std::is_same_v<T, double>) {
      ok = it->is_number();
    } else if constexpr (std::is_integral_v<T>) {
      ok = it->is_number_unsigned();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = it->is_string();
    }
    if (!ok) {
      fail(where + "." + key + " has the wrong type");
      return std::nullopt;
    }
    return it->get<T>();
  }

 private:
  std::string source_;
  std::vector<Diagnostic> diags_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (base.empty()) return p.generic_string();
  auto rel = p.lexically_relative(base);
  return rel.empty() ? p.generic_string() : rel.generic_string();
}

}  // namespace

std::vector<MetricId> parse_metric_list(const std::string& list) {
  std::set<MetricId> chosen;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    chosen.insert(metric_from_string(item));
  }
  if (chosen.empty()) throw Error("metric list is empty");
  std::vector<MetricId> out;
  for (MetricId m : kAllMetrics) {
    if (chosen.contains(m)) out.push_back(m);
  }
  return out;
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                        const std::string& source_name) {
  Reader r(source_name);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError({{source_name, 0, std::string("malformed JSON: ") + e.what()}});
  }
  if (!root.is_object()) throw ValidationError({{source_name, 0, "manifest must be a JSON object"}});

  r.check_keys(root, "manifest",
               {"labels", "task", "language", "generation_setup", "candidates", "split", "human",
                "embeddings", "train", "rose", "metrics", "silhouette_distance",
                "bootstrap_resamples", "output_dir", "master_seed"});

  Manifest m;
  m.source = source_name;

  if (auto it = root.find("labels"); it != root.end() && it->is_array()) {
    std::vector<std::string> labels;
    for (const auto& l : *it) {
      if (l.is_string()) labels.push_back(l.get<std::string>());
      else r.fail("labels must be strings");
    }
    try {
      m.labels = LabelSet(std::move(labels));
    } catch (const Error& e) {
      r.fail(e.what());
    }
  } else {
    r.fail("missing 'labels' array");
  }

  if (auto v = r.get<std::string>(root, "task", "manifest")) m.task = *v;
  if (auto v = r.get<std::string>(root, "language", "manifest")) m.language = *v;
  if (auto v = r.get<std::string>(root, "generation_setup", "manifest")) m.generation_setup = *v;

  std::set<std::string> ids;
  if (auto it = root.find("candidates"); it != root.end() && it->is_array()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& c = (*it)[i];
      const std::string where = "candidates[" + std::to_string(i) + "]";
      if (!c.is_object()) {
        r.fail(where + " must be an object");
        continue;
      }
      r.check_keys(c, where,
                   {"id", "param_count", "display_name", "data", "train", "test", "n_requested",
                    "embeddings"});
      ManifestCandidate mc;
      auto id = r.get<std::string>(c, "id", where);
      if (!id || id->empty()) {
        r.fail(where + " needs a non-empty 'id'");
        continue;
      }
      mc.generator.generator_id = *id;
      if (!ids.insert(*id).second) r.fail("duplicate candidate id '" + *id + "'");
      auto pc = r.get<std::uint64_t>(c, "param_count", where);
      if (!pc || *pc == 0) r.fail(where + " needs a positive 'param_count'");
      else mc.generator.param_count = *pc;
      mc.generator.display_name = r.get<std::string>(c, "display_name", where).value_or(*id);
      if (auto p = r.get<std::string>(c, "data", where)) mc.data = resolve(base_dir, *p);
      if (auto p = r.get<std::string>(c, "train", where)) mc.train = resolve(base_dir, *p);
      if (auto p = r.get<std::string>(c, "test", where)) mc.test = resolve(base_dir, *p);
      if (auto p = r.get<std::string>(c, "embeddings", where)) mc.embeddings = resolve(base_dir, *p);
      mc.n_requested = r.get<std::uint64_t>(c, "n_requested", where);
      if (mc.data && (mc.train || mc.test)) {
        r.fail(where + " gives both 'data' and 'train'/'test'");
      } else if (!mc.data && !(mc.train && mc.test)) {
        r.fail(where + " needs 'data' or both 'train' and 'test'");
      }
      m.candidates.push_back(std::move(mc));
    }
  } else {
    r.fail("missing 'candidates' array");
  }
  if (m.candidates.size() < 2) r.fail("at least 2 candidates are required");

  if (auto it = root.find("split"); it != root.end()) {
    r.check_keys(*it, "split", {"test_fraction"});
    if (auto v = r.get<double>(*it, "test_fraction", "split")) m.test_fraction = *v;
    if (!(m.test_fraction > 0.0 && m.test_fraction < 1.0)) r.fail("split.test_fraction must lie in (0, 1)");
  }
  if (auto it = root.find("human"); it != root.end()) {
    r.check_keys(*it, "human", {"train", "test"});
    if (auto p = r.get<std::string>(*it, "train", "human")) m.human_train = resolve(base_dir, *p);
    if (auto p = r.get<std::string>(*it, "test", "human")) m.human_test = resolve(base_dir, *p);
  }
  if (auto it = root.find("embeddings"); it != root.end()) {
    r.check_keys(*it, "embeddings", {"provider", "dim"});
    if (auto v = r.get<std::string>(*it, "provider", "embeddings")) {
      try {
        m.embedding_provider = embedding_provider_from_string(*v);
      } catch (const Error& e) {
        r.fail(e.what());
      }
    }
    if (auto v = r.get<std::uint32_t>(*it, "dim", "embeddings")) m.embedding_dim = *v;
    if (m.embedding_dim == 0) r.fail("embeddings.dim must be positive");
  }
  if (auto it = root.find("train"); it != root.end()) {
    r.check_keys(*it, "train",
                 {"max_epochs", "batch_size", "patience", "learning_rate", "n_buckets",
                  "validation_fraction", "l2_penalty"});
    auto& t = m.train;
    if (auto v = r.get<std::size_t>(*it, "max_epochs", "train")) t.max_epochs = *v;
    if (auto v = r.get<std::size_t>(*it, "batch_size", "train")) t.batch_size = *v;
    if (auto v = r.get<std::size_t>(*it, "patience", "train")) t.patience = *v;
    if (auto v = r.get<double>(*it, "learning_rate", "train")) t.learning_rate = *v;
    if (auto v = r.get<std::uint32_t>(*it, "n_buckets", "train")) t.n_buckets = *v;
    if (auto v = r.get<double>(*it, "validation_fraction", "train")) t.validation_fraction = *v;
    if (auto v = r.get<double>(*it, "l2_penalty", "train")) t.l2_penalty = *v;
    try {
      t.validate();
    } catch (const Error& e) {
      r.fail(e.what());
    }
  }
  if (auto it = root.find("rose"); it != root.end()) {
    r.check_keys(*it, "rose", {"n_runs", "cross_subset_size"});
    if (auto v = r.get<std::size_t>(*it, "n_runs", "rose")) m.n_runs = *v;
    m.cross_subset_size = r.get<std::size_t>(*it, "cross_subset_size", "rose");
    if (m.n_runs == 0) r.fail("rose.n_runs must be >= 1");
    if (m.cross_subset_size &&
        (*m.cross_subset_size == 0 || *m.cross_subset_size + 1 > m.candidates.size())) {
      r.fail("rose.cross_subset_size must lie in 1..(number of candidates - 1)");
    }
  }
  if (auto it = root.find("metrics"); it != root.end()) {
    if (!it->is_array()) {
      r.fail("'metrics' must be an array of metric ids");
    } else {
      std::string joined;
      for (const auto& x : *it) {
        if (!x.is_string()) {
          r.fail("'metrics' must be an array of metric ids");
          continue;
        }
        joined += x.get<std::string>() + ",";
      }
      try {
        m.metrics = parse_metric_list(joined);
      } catch (const Error& e) {
        r.fail(e.what());
      }
    }
  }
  if (auto v = r.get<std::string>(root, "silhouette_distance", "manifest")) {
    try {
      m.silhouette_distance = silhouette_distance_from_string(*v);
    } catch (const Error& e) {
      r.fail(e.what());
    }
  }
  if (auto v = r.get<std::size_t>(root, "bootstrap_resamples", "manifest")) m.bootstrap_resamples = *v;
  if (m.bootstrap_resamples == 0) r.fail("bootstrap_resamples must be positive");
  if (auto v = r.get<std::string>(root, "output_dir", "manifest")) m.output_dir = resolve(base_dir, *v);
  else m.output_dir = resolve(base_dir, "out");
  if (auto v = r.get<std::uint64_t>(root, "master_seed", "manifest")) m.master_seed = *v;

  if (!r.diagnostics().empty()) throw ValidationError(std::move(r.diagnostics()));
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError({{path.string(), 0, "cannot open manifest"}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path(), path.string());
}

std::string manifest_to_json(const Manifest& m, const std::filesystem::path& base_dir) {
  json root;
  root["labels"] = m.labels.labels();
  root["task"] = m.task;
  root["language"] = m.language;
  root["generation_setup"] = m.generation_setup;
  json cands = json::array();
  for (const auto& c : m.candidates) {
    json j = {{"id", c.generator.generator_id},
              {"param_count", c.generator.param_count},
              {"display_name", c.generator.display_name}};
    if (c.data) j["data"] = relative_to(*c.data, base_dir);
    if (c.train) j["train"] = relative_to(*c.train, base_dir);
    if (c.test) j["test"] = relative_to(*c.test, base_dir);
    if (c.n_requested) j["n_requested"] = *c.n_requested;
    if (c.embeddings) j["embeddings"] = relative_to(*c.embeddings, base_dir);
    cands.push_back(std::move(j));
  }
  root["candidates"] = std::move(cands);
  root["split"] = {{"test_fraction", m.test_fraction}};
  json human = json::object();
  if (m.human_train) human["train"] = relative_to(*m.human_train, base_dir);
  if (m.human_test) human["test"] = relative_to(*m.human_test, base_dir);
  if (!human.empty()) root["human"] = std::move(human);
  root["embeddings"] = {{"provider", std::string(to_string(m.embedding_provider))},
                        {"dim", m.embedding_dim}};
  root["train"] = {{"max_epochs", m.train.max_epochs},
                   {"batch_size", m.train.batch_size},
                   {"patience", m.train.patience},
                   {"learning_rate", m.train.learning_rate},
                   {"n_buckets", m.train.n_buckets},
                   {"validation_fraction", m.train.validation_fraction},
                   {"l2_penalty", m.train.l2_penalty}};
  root["rose"] = {{"n_runs", m.n_runs}};
  root["rose"]["cross_subset_size"] =
      m.cross_subset_size ? json(*m.cross_subset_size) : json(nullptr);
  json metrics = json::array();
  for (MetricId id : m.metrics) metrics.push_back(std::string(to_string(id)));
  root["metrics"] = std::move(metrics);
  root["silhouette_distance"] = std::string(to_string(m.silhouette_distance));
  root["bootstrap_resamples"] = m.bootstrap_resamples;
  root["output_dir"] = relative_to(m.output_dir, base_dir);
  root["master_seed"] = m.master_seed;
  return root.dump(2) + "\n";
}

}  // namespace rose
