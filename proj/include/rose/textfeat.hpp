#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rose/corpus.hpp"

namespace rose {

using TokenSequence = std::vector<std::string>;
using Bigram = std::pair<std::string, std::string>;

// Splits normalized text into maximal runs of letters/digits. Runs written in
// a script that does not delimit words (Han, Kana, Thai, Lao, Khmer, Myanmar,
// Tibetan) are split further into one token per character.
TokenSequence tokenize(std::string_view normalized_text);

// Pre-tokenized tokens when the record carries them, otherwise
// tokenize(normalize_text(text)).
TokenSequence sample_tokens(const Sample& sample);

std::vector<Bigram> bigrams(const TokenSequence& tokens);

struct SparseVector {
  std::vector<std::uint32_t> index;  // strictly increasing
  std::vector<double> value;         // no zeros

  std::size_t nnz() const { return index.size(); }
  bool operator==(const SparseVector&) const = default;
};

// Signed feature hashing of unigrams and bigrams.
//
//   unigram key  = mix64(fnv1a64(token) ^ 0x5ca1ab1e00000001)
//   bigram key   = mix64(fnv1a64(a + "\x1f" + b) ^ 0x5ca1ab1e00000002)
//   bucket       = key % n_buckets
//   sign         = bit 63 of key set ? -1 : +1
//
// Values are signed occurrence counts; buckets that cancel to zero are dropped.
SparseVector hash_features(const TokenSequence& tokens, std::uint32_t n_buckets);

enum class EmbeddingProvider { external_file, builtin_hash };

std::string_view to_string(EmbeddingProvider provider);
EmbeddingProvider embedding_provider_from_string(std::string_view s);

struct EmbeddingConfig {
  EmbeddingProvider provider = EmbeddingProvider::builtin_hash;
  std::uint32_t dim = 256;  // builtin-hash only
  // external-file only. When empty, vectors are taken from the records'
  // inline "embedding" field.
  std::filesystem::path path;
};

struct EmbeddingTable {
  std::size_t dim = 0;
  EmbeddingProvider provider = EmbeddingProvider::builtin_hash;
  std::unordered_map<std::string, std::vector<double>> vectors;

  const std::vector<double>& at(const std::string& id) const;
};

// Reads {"id": ..., "vector": [...]} records. Dimension is taken from the first
// record; mismatches and non-finite values are reported as diagnostics.
std::unordered_map<std::string, std::vector<double>> load_embedding_file(
    const std::filesystem::path& path, std::size_t* dim_out = nullptr);

std::vector<double> builtin_embedding(const TokenSequence& tokens, std::uint32_t dim);

EmbeddingTable embed_dataset(const Dataset& dataset, const EmbeddingConfig& config);

}  // namespace rose
