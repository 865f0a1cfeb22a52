#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rose/classifier.hpp"
#include "rose/corpus.hpp"
#include "rose/intrinsic.hpp"
#include "rose/textfeat.hpp"

namespace rose {

struct ManifestCandidate {
  CandidateGenerator generator;
  // Either a single `data` file (split by test_fraction) or explicit
  // `train` + `test` files.
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> test;
  std::optional<std::uint64_t> n_requested;
  std::optional<std::filesystem::path> embeddings;  // external-file provider
};

// Run configuration. Relative paths in the file are resolved against the
// manifest's directory at parse time.
//
// {
//   "labels": ["a", "b"],
//   "task": "intent", "language": "en", "generation_setup": "few-shot",
//   "candidates": [{"id": "g1", "param_count": 7000000000, "data": "g1.jsonl"}],
//   "split": {"test_fraction": 0.2},
//   "human": {"train": "human_train.jsonl", "test": "human_test.jsonl"},
//   "embeddings": {"provider": "builtin-hash", "dim": 256},
//   "train": {"max_epochs": 50, "batch_size": 16, "patience": 5,
//             "learning_rate": 0.001, "n_buckets": 32768,
//             "validation_fraction": 0.1, "l2_penalty": 0.0001},
//   "rose": {"n_runs": 10, "cross_subset_size": null},
//   "metrics": ["rose", "ttr", ...],
//   "silhouette_distance": "cosine",
//   "bootstrap_resamples": 1000,
//   "output_dir": "out",
//   "master_seed": 0
// }
struct Manifest {
  std::filesystem::path source;
  LabelSet labels;
  std::string task = "task";
  std::string language = "und";
  std::string generation_setup = "unspecified";
  std::vector<ManifestCandidate> candidates;
  double test_fraction = 0.2;
  std::optional<std::filesystem::path> human_train;
  std::optional<std::filesystem::path> human_test;
  EmbeddingProvider embedding_provider = EmbeddingProvider::builtin_hash;
  std::uint32_t embedding_dim = 256;
  TrainConfig train;
  std::size_t n_runs = 10;
  std::optional<std::size_t> cross_subset_size;
  std::vector<MetricId> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  SilhouetteDistance silhouette_distance = SilhouetteDistance::cosine;
  std::size_t bootstrap_resamples = 1000;
  std::filesystem::path output_dir = "out";
  std::uint64_t master_seed = 0;
};

// Throws ValidationError listing every problem found.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                        const std::string& source_name = "<manifest>");
Manifest load_manifest(const std::filesystem::path& path);

// Serializes with paths relative to base_dir when possible.
std::string manifest_to_json(const Manifest& manifest, const std::filesystem::path& base_dir);

// Comma-separated metric ids, canonicalized to kAllMetrics order.
std::vector<MetricId> parse_metric_list(const std::string& list);

}  // namespace rose
