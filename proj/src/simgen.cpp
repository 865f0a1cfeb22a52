#include "rose/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "rose/hashing.hpp"

namespace rose {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

std::size_t kept(std::size_t n, double collapse) {
  if (n == 0) return 0;
  const auto k = static_cast<std::size_t>(std::llround((1.0 - collapse) * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n);
}

}  // namespace

void SimSpec::validate() const {
  if (n_labels < 2) throw Error("simgen: n_labels must be >= 2");
  if (samples_per_label == 0) throw Error("simgen: samples_per_label must be positive");
  if (vocab_per_label == 0) throw Error("simgen: vocab_per_label must be positive");
  for (double r : {label_noise_rate, duplication_rate, vocab_collapse}) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error("simgen: rates must lie in [0, 1]");
  }
  if (min_tokens == 0 || max_tokens < min_tokens) throw Error("simgen: bad sample length range");
}

LabelSet sim_labels(std::size_t n_labels) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n_labels; ++i) labels.push_back("label" + std::to_string(i));
  return LabelSet(std::move(labels));
}

std::string sim_word(std::size_t index) {
  const std::size_t syllables = kConsonants.size() * kVowels.size();
  std::string w;
  for (int i = 0; i < 3; ++i) {
    const std::size_t s = index % syllables;
    index /= syllables;
    w.push_back(kConsonants[s / kVowels.size()]);
    w.push_back(kVowels[s % kVowels.size()]);
  }
  return w;
}

Dataset generate_fixture(const SimSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);
  const LabelSet labels = sim_labels(spec.n_labels);

  const std::size_t shared = kept(spec.shared_vocab, spec.vocab_collapse);
  const std::size_t per_label = kept(spec.vocab_per_label, spec.vocab_collapse);

  struct Draft {
    std::vector<std::string> words;
    std::size_t label;
  };
  std::vector<Draft> drafts;
  drafts.reserve(spec.n_labels * spec.samples_per_label);
  for (std::size_t l = 0; l < spec.n_labels; ++l) {
    const std::size_t label_base = spec.shared_vocab + l * spec.vocab_per_label;
    const std::size_t first = drafts.size();
    for (std::size_t i = 0; i < spec.samples_per_label; ++i) {
      if (i > 0 && spec.duplication_rate > 0.0 && rng.bernoulli(spec.duplication_rate)) {
        drafts.push_back(drafts[first + rng.below(i)]);
        continue;
      }
      const std::size_t len =
          spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
      Draft d{{}, l};
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t pick = rng.below(shared + per_label);
        d.words.push_back(pick < shared ? sim_word(pick) : sim_word(label_base + pick - shared));
      }
      drafts.push_back(std::move(d));
    }
  }
  for (auto& d : drafts) {
    if (spec.label_noise_rate > 0.0 && rng.bernoulli(spec.label_noise_rate)) {
      const std::size_t other = rng.below(spec.n_labels - 1);
      d.label = other >= d.label ? other + 1 : other;
    }
  }
  rng.shuffle(drafts);

  Dataset out;
  out.labels = labels;
  out.samples.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    std::string text;
    for (const auto& w : drafts[i].words) {
      if (!text.empty()) text.push_back(' ');
      text += w;
    }
    if (!text.empty()) text[0] = static_cast<char>(text[0] - 'a' + 'A');
    text.push_back('.');
    char id[32];
    std::snprintf(id, sizeof id, "s%05zu", i);
    out.samples.push_back({id, std::move(text), labels[drafts[i].label], {}, {}, {}});
  }
  return out;
}

SimSpec apply(SimSpec spec, const KnobOverrides& o) {
  if (o.label_noise_rate) spec.label_noise_rate = *o.label_noise_rate;
  if (o.duplication_rate) spec.duplication_rate = *o.duplication_rate;
  if (o.vocab_collapse) spec.vocab_collapse = *o.vocab_collapse;
  if (o.samples_per_label) spec.samples_per_label = *o.samples_per_label;
  return spec;
}

CandidateFamily generate_candidate_family(
    const SimSpec& base, const std::vector<std::pair<std::string, KnobOverrides>>& degradations,
    double test_fraction) {
  CandidateFamily family;
  std::set<std::string> seen;
  for (const auto& [id, overrides] : degradations) {
    if (!seen.insert(id).second) throw Error("simgen: duplicate generator id '" + id + "'");
    SimSpec spec = apply(base, overrides);
    spec.rng_seed = SeedBuilder(base.rng_seed).add("candidate").add(id).seed();
    Dataset full = balance_by_label(generate_fixture(spec),
                                    SeedBuilder(spec.rng_seed).add("balance").seed());
    full.generator_id = id;
    auto [train, test] =
        split_dataset(full, test_fraction, SeedBuilder(spec.rng_seed).add("split").seed());
    train.split = Split::synthetic_train;
    test.split = Split::synthetic_test;
    family.datasets.emplace(id, TrainTest{std::move(train), std::move(test)});
    family.ground_truth_order.push_back(id);
  }
  return family;
}

Dataset generate_reference(const SimSpec& base, std::uint64_t seed, Split split) {
  SimSpec spec = base;
  spec.label_noise_rate = 0.0;
  spec.duplication_rate = 0.0;
  spec.vocab_collapse = 0.0;
  spec.rng_seed = seed;
  Dataset d = generate_fixture(spec);
  d.generator_id = "human";
  d.split = split;
  return d;
}

}  // namespace rose
