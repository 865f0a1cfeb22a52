#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rose/error.hpp"

namespace rose {

// Ordered, duplicate-free list of class names. The order is fixed by the
// manifest and is used as the tie-break order everywhere labels compete.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::string& operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<std::string>& labels() const { return labels_; }

  bool contains(std::string_view label) const;
  // Position of label in the set; throws Error if absent.
  std::size_t index_of(std::string_view label) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

struct CandidateGenerator {
  std::string generator_id;
  std::uint64_t param_count = 1;
  std::string display_name;

  bool operator==(const CandidateGenerator&) const = default;
};

struct Sample {
  std::string id;
  std::string text;
  std::string label;
  std::optional<std::vector<double>> embedding;
  // Pre-tokenized input; when present it replaces the built-in tokenizer.
  std::optional<std::vector<std::string>> tokens;
  std::map<std::string, std::string> meta;

  bool operator==(const Sample&) const = default;
};

enum class Split { synthetic_train, synthetic_test, human_train, human_test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view s);

struct Dataset {
  std::string generator_id;
  std::string task;
  std::string language;
  Split split = Split::synthetic_train;
  LabelSet labels;
  std::vector<Sample> samples;
  std::optional<std::uint64_t> n_requested;

  bool operator==(const Dataset&) const = default;
};

// Parses the line-delimited JSON dataset format. Every problem in the input is
// collected and thrown together as a ValidationError. Blank lines are skipped.
Dataset parse_dataset(std::istream& in, const LabelSet& expected_labels,
                      const std::string& source_name = "<stream>");
Dataset load_dataset(const std::filesystem::path& path, const LabelSet& expected_labels);

void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Lowercase (simple case folding), drop Unicode punctuation (P* categories),
// collapse whitespace runs and trim.
std::string normalize_text(std::string_view text);

// Sample count per label, indexed like dataset.labels.
std::vector<std::size_t> label_counts(const Dataset& dataset);

// Downsamples every label to the minimum per-label count.
Dataset balance_by_label(const Dataset& dataset, std::uint64_t rng_seed);

// Stratified split: per label, round(test_fraction * count) samples go to the
// second (test) output. Both outputs keep input order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t rng_seed);

enum class ValidSource { n_requested, dedup_fallback };
std::string_view to_string(ValidSource source);

struct ValidFraction {
  double value = 0.0;
  ValidSource source = ValidSource::dedup_fallback;
};

ValidFraction valid_fraction(const Dataset& dataset);

// Content hash of ids, texts, labels and tokens, in sample order.
std::uint64_t fingerprint(const Dataset& dataset);

Dataset concat(const Dataset& a, const Dataset& b);

}  // namespace rose
