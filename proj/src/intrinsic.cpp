#include "rose/intrinsic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "rose/hashing.hpp"

namespace rose {

namespace {

constexpr std::array<std::string_view, 9> kMetricNames = {
    "avg_cos_dist", "bigram_div",    "n_valid",         "silhouette", "ttr",
    "token_entropy", "param_size", "random_baseline", "rose",
};

// Token counts pooled over all samples.
std::unordered_map<std::string, std::size_t> token_counts(const Dataset& dataset,
                                                          std::size_t& total) {
  std::unordered_map<std::string, std::size_t> counts;
  total = 0;
  for (const auto& s : dataset.samples) {
    for (auto& t : sample_tokens(s)) {
      ++counts[std::move(t)];
      ++total;
    }
  }
  return counts;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::string_view to_string(MetricId id) { return kMetricNames[static_cast<std::size_t>(id)]; }

MetricId metric_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
    if (kMetricNames[i] == s) return static_cast<MetricId>(i);
  }
  throw Error("unknown metric '" + std::string(s) + "'");
}

double type_token_ratio(const Dataset& dataset) {
  std::size_t total = 0;
  const auto counts = token_counts(dataset, total);
  if (total == 0) throw Error("type_token_ratio: dataset has no tokens");
  return static_cast<double>(counts.size()) / static_cast<double>(total);
}

double token_entropy(const Dataset& dataset) {
  std::size_t total = 0;
  const auto counts = token_counts(dataset, total);
  if (total == 0) throw Error("token_entropy: dataset has no tokens");
  // Sum in a fixed (sorted) order so the result does not depend on hash
  // table iteration order.
  std::vector<std::size_t> c;
  c.reserve(counts.size());
  for (const auto& [tok, n] : counts) c.push_back(n);
  std::sort(c.begin(), c.end());
  const double n_total = static_cast<double>(total);
  double h = 0.0;
  for (std::size_t n : c) {
    const double p = static_cast<double>(n) / n_total;
    h -= p * std::log(p);
  }
  return h;
}

double bigram_diversity(const Dataset& dataset) {
  std::set<Bigram> distinct;
  std::size_t total = 0;
  for (const auto& s : dataset.samples) {
    for (auto& b : bigrams(sample_tokens(s))) {
      distinct.insert(std::move(b));
      ++total;
    }
  }
  if (total == 0) throw Error("bigram_diversity: dataset has no bigrams");
  return static_cast<double>(distinct.size()) / static_cast<double>(total);
}

std::string_view to_string(SilhouetteDistance d) {
  return d == SilhouetteDistance::cosine ? "cosine" : "euclidean";
}

SilhouetteDistance silhouette_distance_from_string(std::string_view s) {
  if (s == "cosine") return SilhouetteDistance::cosine;
  if (s == "euclidean") return SilhouetteDistance::euclidean;
  throw Error("unknown silhouette distance '" + std::string(s) + "'");
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("cosine_distance: dimension mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw Error("cosine_distance: zero-norm vector");
  // 1 - cos = |u - v|^2 / 2 for unit u, v; this form is exactly 0 for
  // identical directions.
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] / na - b[i] / nb;
    acc += d * d;
  }
  return 0.5 * acc;
}

double avg_pairwise_cosine_distance(const Dataset& dataset, const EmbeddingTable& embeddings) {
  std::vector<std::vector<const std::vector<double>*>> by_label(dataset.labels.size());
  for (const auto& s : dataset.samples) {
    by_label[dataset.labels.index_of(s.label)].push_back(&embeddings.at(s.id));
  }
  double sum_over_labels = 0.0;
  for (std::size_t l = 0; l < by_label.size(); ++l) {
    const auto& vs = by_label[l];
    if (vs.size() < 2) {
      throw Error("avg_pairwise_cosine_distance: label '" + dataset.labels[l] +
                  "' has fewer than 2 samples");
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      for (std::size_t j = i + 1; j < vs.size(); ++j) {
        sum += cosine_distance(*vs[i], *vs[j]);
        ++pairs;
      }
    }
    sum_over_labels += sum / static_cast<double>(pairs);
  }
  return sum_over_labels / static_cast<double>(by_label.size());
}

double silhouette_score(const Dataset& dataset, const EmbeddingTable& embeddings,
                        SilhouetteDistance distance) {
  const std::size_t n_labels = dataset.labels.size();
  const std::size_t n = dataset.samples.size();
  std::vector<std::size_t> label(n);
  std::vector<std::size_t> label_size(n_labels, 0);
  for (std::size_t i = 0; i < n; ++i) {
    label[i] = dataset.labels.index_of(dataset.samples[i].label);
    ++label_size[label[i]];
  }
  if (n_labels < 2) throw Error("silhouette_score: needs at least 2 labels");
  for (std::size_t l = 0; l < n_labels; ++l) {
    if (label_size[l] < 2) {
      throw Error("silhouette_score: label '" + dataset.labels[l] + "' has fewer than 2 samples");
    }
  }

  // Cosine distance is evaluated on unit vectors as |u - v|^2 / 2.
  std::vector<std::vector<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = embeddings.at(dataset.samples[i].id);
    if (distance == SilhouetteDistance::cosine) {
      const double nv = norm(x[i]);
      if (nv == 0.0) throw Error("silhouette_score: zero-norm vector");
      for (double& v : x[i]) v /= nv;
    }
  }
  auto dist = [&](std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x[i].size(); ++k) {
      const double d = x[i][k] - x[j][k];
      acc += d * d;
    }
    return distance == SilhouetteDistance::cosine ? 0.5 * acc : std::sqrt(acc);
  };

  // Symmetric distance matrix, filled once.
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = dist(i, j);
  }

  double total = 0.0;
  std::vector<double> sums(n_labels);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[label[j]] += d[i * n + j];
    }
    const double a = sums[label[i]] / static_cast<double>(label_size[label[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n_labels; ++l) {
      if (l == label[i]) continue;
      b = std::min(b, sums[l] / static_cast<double>(label_size[l]));
    }
    const double m = std::max(a, b);
    total += m == 0.0 ? 0.0 : (b - a) / m;
  }
  return total / static_cast<double>(n);
}

double param_size_score(const CandidateGenerator& candidate) {
  return static_cast<double>(candidate.param_count);
}

std::vector<MetricScore> random_baseline(std::span<const CandidateGenerator> candidates,
                                         std::size_t n_runs, std::uint64_t rng_seed) {
  if (candidates.empty()) throw Error("random_baseline: empty candidate list");
  if (n_runs == 0) throw Error("random_baseline: n_runs must be positive");
  std::vector<MetricScore> out(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    out[c].metric_id = MetricId::random_baseline;
    out[c].generator_id = candidates[c].generator_id;
    out[c].per_run_values.assign(n_runs, 0.0);
  }
  Rng rng(rng_seed);
  for (std::size_t r = 0; r < n_runs; ++r) {
    out[rng.below(candidates.size())].per_run_values[r] = 1.0;
  }
  for (auto& s : out) {
    double sum = 0.0;
    for (double v : s.per_run_values) sum += v;
    s.value = sum / static_cast<double>(n_runs);
  }
  return out;
}

std::vector<std::string> random_selections(std::span<const MetricScore> scores) {
  if (scores.empty()) return {};
  const std::size_t n_runs = scores.front().per_run_values.size();
  std::vector<std::string> out(n_runs);
  for (const auto& s : scores) {
    if (s.per_run_values.size() != n_runs) throw Error("random_selections: ragged per-run values");
    for (std::size_t r = 0; r < n_runs; ++r) {
      if (s.per_run_values[r] == 1.0) out[r] = s.generator_id;
    }
  }
  for (const auto& id : out) {
    if (id.empty()) throw Error("random_selections: run without a selection");
  }
  return out;
}

}  // namespace rose
