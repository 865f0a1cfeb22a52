#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rose/corpus.hpp"
#include "rose/textfeat.hpp"

namespace rose {

enum class MetricId {
  avg_cos_dist,
  bigram_div,
  n_valid,
  silhouette,
  ttr,
  token_entropy,
  param_size,
  random_baseline,
  rose,
};

// Canonical order; reports list metrics in this order.
inline constexpr std::array<MetricId, 9> kAllMetrics = {
    MetricId::avg_cos_dist, MetricId::bigram_div,    MetricId::n_valid,
    MetricId::silhouette,   MetricId::ttr,           MetricId::token_entropy,
    MetricId::param_size,   MetricId::random_baseline, MetricId::rose,
};

std::string_view to_string(MetricId id);
MetricId metric_from_string(std::string_view s);

struct MetricScore {
  MetricId metric_id = MetricId::ttr;
  std::string generator_id;
  double value = 0.0;
  std::vector<double> per_run_values;  // empty for deterministic metrics

  bool operator==(const MetricScore&) const = default;
};

// Intrinsic metrics pool tokens over the whole dataset. Bigrams never cross
// sample boundaries.
double type_token_ratio(const Dataset& dataset);
double token_entropy(const Dataset& dataset);  // nats
double bigram_diversity(const Dataset& dataset);

enum class SilhouetteDistance { cosine, euclidean };

std::string_view to_string(SilhouetteDistance d);
SilhouetteDistance silhouette_distance_from_string(std::string_view s);

double cosine_distance(std::span<const double> a, std::span<const double> b);

double avg_pairwise_cosine_distance(const Dataset& dataset, const EmbeddingTable& embeddings);
double silhouette_score(const Dataset& dataset, const EmbeddingTable& embeddings,
                        SilhouetteDistance distance = SilhouetteDistance::cosine);

double param_size_score(const CandidateGenerator& candidate);

// One uniform pick per run. Each returned score carries the per-run indicator
// (1 if chosen in that run) and value = selection frequency. Output follows the
// input candidate order.
std::vector<MetricScore> random_baseline(std::span<const CandidateGenerator> candidates,
                                         std::size_t n_runs, std::uint64_t rng_seed);

// Run-by-run chosen generator recovered from random_baseline indicators.
std::vector<std::string> random_selections(std::span<const MetricScore> scores);

}  // namespace rose
