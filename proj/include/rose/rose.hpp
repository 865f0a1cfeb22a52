#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rose/classifier.hpp"
#include "rose/corpus.hpp"

namespace rose {

// Round-robin synthetic data evaluation.
//
// For every candidate and run, a classifier is trained on the candidate's
// synthetic-train split and scored (macro-F1) on the synthetic-test split of
// each peer. A candidate's score is the mean over runs of the per-run mean
// over evaluated peers. The candidate with the highest score is selected.

struct RoseConfig {
  std::size_t n_runs = 10;
  TrainConfig train_config;
  // Evaluate each (candidate, run) on k randomly drawn peers instead of all.
  std::optional<std::size_t> cross_subset_size;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
};

struct RoseCell {
  std::string trained_on;
  std::string evaluated_on;
  std::size_t run_index = 0;
  double f1 = 0.0;

  bool operator==(const RoseCell&) const = default;
};

struct RoseScore {
  std::string generator_id;
  double score = 0.0;
  std::vector<RoseCell> cells;
  std::vector<double> per_run_means;
  // F1 of the same per-run models on additional named evaluation sets
  // (for example held-out human data), indexed by run.
  std::map<std::string, std::vector<double>> extra_per_run;

  bool operator==(const RoseScore&) const = default;
};

struct TrainTest {
  Dataset train;
  Dataset test;
};

using DatasetMap = std::map<std::string, TrainTest>;

struct NamedDataset {
  std::string name;
  const Dataset* dataset = nullptr;
};

struct RoseResult {
  std::vector<RoseScore> scores;  // sorted by generator_id
  std::string selected;

  bool operator==(const RoseResult&) const = default;
};

using ClassifierFactory = std::function<std::unique_ptr<TextClassifier>()>;

// Seed of the classifier trained for one (candidate, run). Keyed on the
// content of the candidate's training data rather than its id, so that
// renaming candidates does not change their models.
std::uint64_t run_seed(std::uint64_t master_seed, const Dataset& train_data, std::size_t run);

// Peers evaluated by (candidate, run): all peers (sorted) when k is absent or
// covers every peer, otherwise a seeded k-subset kept in sorted order.
std::vector<std::string> evaluated_peers(const std::string& candidate,
                                         std::span<const std::string> all_ids,
                                         const RoseConfig& config, std::size_t run);

RoseScore rose_score(const std::string& candidate, const DatasetMap& all_datasets,
                     const RoseConfig& config, std::span<const NamedDataset> extra_eval = {},
                     const ClassifierFactory& factory = {});

RoseResult rose_all(std::span<const std::string> candidates, const DatasetMap& all_datasets,
                    const RoseConfig& config, std::span<const NamedDataset> extra_eval = {},
                    const ClassifierFactory& factory = {});

// Full cross-evaluation: every (candidate, run) model evaluated on every peer
// and every extra set. Folding it reproduces rose_all for any candidate
// subset and any k without retraining.
struct CrossEvaluation {
  std::vector<std::string> ids;  // sorted
  std::size_t n_runs = 0;
  // f1[(c * n_runs + r) * ids.size() + p]; NaN on the diagonal.
  std::vector<double> f1;
  std::map<std::string, std::vector<double>> extra;  // [c * n_runs + r]

  std::size_t index_of(const std::string& id) const;
  double at(std::size_t c, std::size_t r, std::size_t p) const {
    return f1[(c * n_runs + r) * ids.size() + p];
  }
};

CrossEvaluation cross_evaluate(std::span<const std::string> candidates,
                               const DatasetMap& all_datasets, const RoseConfig& config,
                               std::span<const NamedDataset> extra_eval = {},
                               const ClassifierFactory& factory = {});

// RoSE restricted to `subset` (peers outside the subset are ignored), using
// config.cross_subset_size and config.master_seed for peer sampling.
RoseResult rose_from_cross(const CrossEvaluation& cross, std::span<const std::string> subset,
                           const RoseConfig& config);

std::string select_best(std::span<const RoseScore> scores);

// Per-run winner: argmax of per_run_means[r], ties by smaller id.
std::vector<std::string> per_run_selection(std::span<const RoseScore> scores);

// Reruns the selection with cross_subset_size = k for each k.
std::map<std::size_t, RoseResult> rose_subset_sweep(std::span<const std::string> candidates,
                                                    const DatasetMap& all_datasets,
                                                    const RoseConfig& config,
                                                    std::span<const std::size_t> k_values);

}  // namespace rose
