#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rose/corpus.hpp"
#include "rose/textfeat.hpp"

namespace rose {

struct TrainConfig {
  std::size_t max_epochs = 50;
  std::size_t batch_size = 16;
  std::size_t patience = 5;
  double learning_rate = 1e-3;
  std::uint32_t n_buckets = 1u << 15;
  double validation_fraction = 0.1;
  std::uint64_t rng_seed = 0;
  double l2_penalty = 1e-4;

  // Throws Error on out-of-range fields.
  void validate() const;
  std::uint64_t hash() const;

  bool operator==(const TrainConfig&) const = default;
};

struct FeaturizedSample {
  SparseVector x;
  std::size_t label = 0;  // index into the label set
};

std::vector<FeaturizedSample> featurize(const Dataset& dataset, std::uint32_t n_buckets);
std::vector<SparseVector> featurize(std::span<const Sample> samples, std::uint32_t n_buckets);

// Multinomial logistic regression over hashed features. weights is row-major
// [n_labels x n_buckets].
struct TrainedModel {
  LabelSet label_order;
  std::uint32_t n_buckets = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  std::vector<double> train_history;  // validation macro-F1 per epoch
  std::size_t best_epoch = 0;         // 1-based; 0 if never trained
  std::uint64_t config_hash = 0;

  static TrainedModel zeros(const LabelSet& labels, std::uint32_t n_buckets);

  std::size_t n_labels() const { return label_order.size(); }
  double& w(std::size_t label, std::uint32_t bucket) {
    return weights[label * n_buckets + bucket];
  }
  double w(std::size_t label, std::uint32_t bucket) const {
    return weights[label * n_buckets + bucket];
  }

  std::vector<double> scores(const SparseVector& x) const;

  bool operator==(const TrainedModel&) const = default;
};

struct Gradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

// Mean cross-entropy over batch plus (l2/2)*|W|^2 (bias unpenalized).
// Fills grad when non-null.
double loss_and_gradient(const TrainedModel& model, std::span<const FeaturizedSample> batch,
                         double l2_penalty, Gradient* grad);

// model -= learning_rate * grad
void apply_gradient(TrainedModel& model, const Gradient& grad, double learning_rate);

// One mini-batch descent step using the sparse update path that train() uses.
void sparse_step(TrainedModel& model, std::span<const FeaturizedSample> batch,
                 double learning_rate, double l2_penalty);

TrainedModel train(const Dataset& train_data, const TrainConfig& config);

std::size_t predict_index(const TrainedModel& model, const SparseVector& x);
std::vector<std::string> predict(const TrainedModel& model, std::span<const Sample> samples);

struct EvalResult {
  double macro_f1 = 0.0;
  std::map<std::string, double> per_label_f1;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
};

EvalResult macro_f1(std::span<const std::string> gold, std::span<const std::string> predicted,
                    const LabelSet& label_set);

// Same computation on label indices.
EvalResult macro_f1_indices(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                            const LabelSet& label_set);

// Train/evaluate convenience: macro-F1 of model on a labelled dataset.
double evaluate_f1(const TrainedModel& model, const Dataset& test);
double evaluate_f1(const TrainedModel& model, std::span<const FeaturizedSample> test);

// Analytic gradient vs central finite differences at a seeded random point.
// Relative deviation per coordinate is |a - n| / max(|a|, |n|, 1e-6).
double gradient_check(const TrainConfig& config, const Dataset& probe, double step = 1e-5,
                      std::size_t n_coordinates = 20);

// Binary dump: "ROSEMDL1", then little-endian fields.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

// Interface the round-robin orchestration trains through, so another backend
// can be substituted for the built-in logistic regression.
class TextClassifier {
 public:
  virtual ~TextClassifier() = default;
  virtual void fit(const Dataset& train_data, const TrainConfig& config) = 0;
  virtual double evaluate(const Dataset& test) const = 0;
};

class HashedLogisticClassifier final : public TextClassifier {
 public:
  void fit(const Dataset& train_data, const TrainConfig& config) override;
  double evaluate(const Dataset& test) const override;

  const TrainedModel& model() const { return model_; }

 private:
  TrainedModel model_;
};

}  // namespace rose
