#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rose/corpus.hpp"
#include "rose/rose.hpp"

namespace rose {

// Knobs of a synthetic "generator". Tokens are enumerated word-like strings
// (three consonant-vowel syllables), not natural language.
struct SimSpec {
  std::size_t n_labels = 3;
  std::size_t samples_per_label = 100;
  std::size_t vocab_per_label = 30;
  std::size_t shared_vocab = 60;
  double label_noise_rate = 0.0;
  double duplication_rate = 0.0;
  double vocab_collapse = 0.0;
  std::size_t min_tokens = 6;
  std::size_t max_tokens = 12;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

LabelSet sim_labels(std::size_t n_labels);

// The word with the given vocabulary index.
std::string sim_word(std::size_t index);

// Tokens are drawn uniformly from the union of the sample's label vocabulary
// and the shared vocabulary (both truncated by vocab_collapse). Then, in
// order: duplication (a sample becomes a copy of an earlier sample of the same
// label), label noise (label reassigned uniformly among the other labels),
// and a final seeded shuffle of the file order.
Dataset generate_fixture(const SimSpec& spec);

struct KnobOverrides {
  std::optional<double> label_noise_rate;
  std::optional<double> duplication_rate;
  std::optional<double> vocab_collapse;
  std::optional<std::size_t> samples_per_label;
};

SimSpec apply(SimSpec spec, const KnobOverrides& overrides);

struct CandidateFamily {
  DatasetMap datasets;
  // Construction order of the degradations, best first.
  std::vector<std::string> ground_truth_order;
};

// One dataset per entry, seeded by (base.rng_seed, generator id), balanced by
// label and split stratified into synthetic train/test. Entries are listed from least to most
// degraded; that order is the ground truth.
CandidateFamily generate_candidate_family(
    const SimSpec& base, const std::vector<std::pair<std::string, KnobOverrides>>& degradations,
    double test_fraction = 0.2);

// Clean data from the base distribution standing in for human-labelled data.
Dataset generate_reference(const SimSpec& base, std::uint64_t seed, Split split);

}  // namespace rose
