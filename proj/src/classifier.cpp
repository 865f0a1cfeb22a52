#include "rose/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "rose/hashing.hpp"

namespace rose {

void TrainConfig::validate() const {
  if (max_epochs == 0) throw Error("train config: max_epochs must be positive");
  if (batch_size == 0) throw Error("train config: batch_size must be positive");
  if (patience == 0) throw Error("train config: patience must be positive");
  if (patience > max_epochs) throw Error("train config: patience exceeds max_epochs");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error("train config: learning_rate must be positive");
  }
  if (n_buckets < 2) throw Error("train config: n_buckets must be >= 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error("train config: validation_fraction must lie in (0, 1)");
  }
  if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty)) {
    throw Error("train config: l2_penalty must be nonnegative");
  }
}

std::uint64_t TrainConfig::hash() const {
  auto bits = [](double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof u);
    return u;
  };
  return SeedBuilder(0x7261696e636f6e66ULL)
      .add(max_epochs)
      .add(batch_size)
      .add(patience)
      .add(bits(learning_rate))
      .add(n_buckets)
      .add(bits(validation_fraction))
      .add(rng_seed)
      .add(bits(l2_penalty))
      .seed();
}

std::vector<FeaturizedSample> featurize(const Dataset& dataset, std::uint32_t n_buckets) {
  std::vector<FeaturizedSample> out;
  out.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    out.push_back({hash_features(sample_tokens(s), n_buckets), dataset.labels.index_of(s.label)});
  }
  return out;
}

std::vector<SparseVector> featurize(std::span<const Sample> samples, std::uint32_t n_buckets) {
  std::vector<SparseVector> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(hash_features(sample_tokens(s), n_buckets));
  return out;
}

TrainedModel TrainedModel::zeros(const LabelSet& labels, std::uint32_t n_buckets) {
  TrainedModel m;
  m.label_order = labels;
  m.n_buckets = n_buckets;
  m.weights.assign(labels.size() * n_buckets, 0.0);
  m.bias.assign(labels.size(), 0.0);
  return m;
}

std::vector<double> TrainedModel::scores(const SparseVector& x) const {
  std::vector<double> out(bias);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.nnz(); ++i) acc += w(k, x.index[i]) * x.value[i];
    out[k] += acc;
  }
  return out;
}

namespace {

// Softmax in place, shifted by the max score.
void softmax(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

double log_sum_exp(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return m + std::log(sum);
}

std::size_t argmax_first(const std::vector<double>& z) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < z.size(); ++k) {
    if (z[k] > z[best]) best = k;
  }
  return best;
}

// Weights held as scale * v so the L2 shrink of every coordinate costs O(1)
// per step; only coordinates touched by the batch are written.
struct LazyModel {
  std::size_t n_labels;
  std::uint32_t n_buckets;
  std::vector<double> v;
  std::vector<double> bias;
  double scale = 1.0;

  explicit LazyModel(const TrainedModel& m)
      : n_labels(m.n_labels()), n_buckets(m.n_buckets), v(m.weights), bias(m.bias) {}

  std::vector<double> scores(const SparseVector& x) const {
    std::vector<double> out(bias);
    for (std::size_t k = 0; k < n_labels; ++k) {
      const double* row = &v[k * n_buckets];
      double acc = 0.0;
      for (std::size_t i = 0; i < x.nnz(); ++i) acc += row[x.index[i]] * x.value[i];
      out[k] += scale * acc;
    }
    return out;
  }

  void step(std::span<const FeaturizedSample> batch, double lr, double l2) {
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    // Residuals are computed against the pre-step parameters for the whole batch.
    std::vector<std::vector<double>> residual;
    residual.reserve(batch.size());
    for (const auto& s : batch) {
      auto p = scores(s.x);
      softmax(p);
      p[s.label] -= 1.0;
      residual.push_back(std::move(p));
    }
    scale *= (1.0 - lr * l2);
    const double coef = lr * inv_n / scale;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& x = batch[b].x;
      for (std::size_t k = 0; k < n_labels; ++k) {
        const double r = residual[b][k];
        if (r == 0.0) continue;
        double* row = &v[k * n_buckets];
        for (std::size_t i = 0; i < x.nnz(); ++i) row[x.index[i]] -= coef * r * x.value[i];
      }
    }
    for (std::size_t k = 0; k < n_labels; ++k) {
      double g = 0.0;
      for (std::size_t b = 0; b < batch.size(); ++b) g += residual[b][k];
      bias[k] -= lr * g * inv_n;
    }
    if (scale < 1e-6) fold_scale();
  }

  void fold_scale() {
    for (double& x : v) x *= scale;
    scale = 1.0;
  }

  void store(TrainedModel& m) const {
    m.weights.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) m.weights[i] = scale * v[i];
    m.bias = bias;
  }
};

}  // namespace

double loss_and_gradient(const TrainedModel& model, std::span<const FeaturizedSample> batch,
                         double l2_penalty, Gradient* grad) {
  if (batch.empty()) throw Error("loss_and_gradient: empty batch");
  const std::size_t n_labels = model.n_labels();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (grad) {
    grad->weights.assign(model.weights.size(), 0.0);
    grad->bias.assign(n_labels, 0.0);
  }
  double loss = 0.0;
  for (const auto& s : batch) {
    auto z = model.scores(s.x);
    loss += log_sum_exp(z) - z[s.label];
    if (!grad) continue;
    softmax(z);
    z[s.label] -= 1.0;
    for (std::size_t k = 0; k < n_labels; ++k) {
      const double r = z[k] * inv_n;
      grad->bias[k] += r;
      for (std::size_t i = 0; i < s.x.nnz(); ++i) {
        grad->weights[k * model.n_buckets + s.x.index[i]] += r * s.x.value[i];
      }
    }
  }
  loss *= inv_n;
  double sq = 0.0;
  for (double w : model.weights) sq += w * w;
  loss += 0.5 * l2_penalty * sq;
  if (grad) {
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
      grad->weights[i] = grad->weights[i] + l2_penalty * model.weights[i];
    }
  }
  return loss;
}

void apply_gradient(TrainedModel& model, const Gradient& grad, double learning_rate) {
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    model.weights[i] -= learning_rate * grad.weights[i];
  }
  for (std::size_t k = 0; k < model.bias.size(); ++k) model.bias[k] -= learning_rate * grad.bias[k];
}

void sparse_step(TrainedModel& model, std::span<const FeaturizedSample> batch,
                 double learning_rate, double l2_penalty) {
  LazyModel lazy(model);
  lazy.step(batch, learning_rate, l2_penalty);
  lazy.store(model);
}

std::size_t predict_index(const TrainedModel& model, const SparseVector& x) {
  return argmax_first(model.scores(x));
}

std::vector<std::string> predict(const TrainedModel& model, std::span<const Sample> samples) {
  std::vector<std::string> out;
  out.reserve(samples.size());
  for (const auto& x : featurize(samples, model.n_buckets)) {
    out.push_back(model.label_order[predict_index(model, x)]);
  }
  return out;
}

EvalResult macro_f1_indices(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                            const LabelSet& label_set) {
  if (gold.size() != predicted.size()) throw Error("macro_f1: gold/predicted length mismatch");
  if (gold.empty()) throw Error("macro_f1: empty input");
  const std::size_t n = label_set.size();
  EvalResult r;
  r.confusion.assign(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= n || predicted[i] >= n) throw Error("macro_f1: label index out of range");
    ++r.confusion[gold[i]][predicted[i]];
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double tp = static_cast<double>(r.confusion[k][k]);
    double gold_k = 0.0, pred_k = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      gold_k += static_cast<double>(r.confusion[k][j]);
      pred_k += static_cast<double>(r.confusion[j][k]);
    }
    const double precision = pred_k > 0.0 ? tp / pred_k : 0.0;
    const double recall = gold_k > 0.0 ? tp / gold_k : 0.0;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    r.per_label_f1[label_set[k]] = f1;
    sum += f1;
  }
  r.macro_f1 = sum / static_cast<double>(n);
  return r;
}

EvalResult macro_f1(std::span<const std::string> gold, std::span<const std::string> predicted,
                    const LabelSet& label_set) {
  if (gold.size() != predicted.size()) throw Error("macro_f1: gold/predicted length mismatch");
  std::vector<std::size_t> g, p;
  g.reserve(gold.size());
  p.reserve(predicted.size());
  for (const auto& l : gold) g.push_back(label_set.index_of(l));
  for (const auto& l : predicted) p.push_back(label_set.index_of(l));
  return macro_f1_indices(g, p, label_set);
}

double evaluate_f1(const TrainedModel& model, std::span<const FeaturizedSample> test) {
  std::vector<std::size_t> gold, pred;
  gold.reserve(test.size());
  pred.reserve(test.size());
  for (const auto& s : test) {
    gold.push_back(s.label);
    pred.push_back(predict_index(model, s.x));
  }
  return macro_f1_indices(gold, pred, model.label_order).macro_f1;
}

double evaluate_f1(const TrainedModel& model, const Dataset& test) {
  if (!(test.labels == model.label_order)) throw Error("evaluate: label set mismatch");
  return evaluate_f1(model, featurize(test, model.n_buckets));
}

TrainedModel train(const Dataset& train_data, const TrainConfig& config) {
  config.validate();
  const auto counts = label_counts(train_data);
  if (counts.size() < 2) throw Error("train: degenerate label set");
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (counts[l] != counts[0]) throw Error("train: training data is not balanced by label");
  }
  if (counts[0] == 0) throw Error("train: no training samples");

  const auto [fit_part, val_part] = split_dataset(
      train_data, config.validation_fraction,
      SeedBuilder(config.rng_seed).add("validation").seed());
  for (std::size_t c : label_counts(fit_part)) {
    if (c == 0) throw Error("train: validation split leaves a label without training samples");
  }
  for (std::size_t c : label_counts(val_part)) {
    if (c == 0) throw Error("train: validation split leaves a label without validation samples");
  }

  const auto fit = featurize(fit_part, config.n_buckets);
  const auto val = featurize(val_part, config.n_buckets);

  TrainedModel best = TrainedModel::zeros(train_data.labels, config.n_buckets);
  best.config_hash = config.hash();
  LazyModel lazy(best);
  TrainedModel current = best;

  Rng rng(SeedBuilder(config.rng_seed).add("shuffle").seed());
  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<FeaturizedSample> batch;
  batch.reserve(config.batch_size);

  std::vector<double> history;
  double best_f1 = -1.0;
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(fit[order[i]]);
      lazy.step(batch, config.learning_rate, config.l2_penalty);
    }
    lazy.store(current);
    const double f1 = evaluate_f1(current, val);
    history.push_back(f1);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_epoch = epoch;
      since_best = 0;
      best.weights = current.weights;
      best.bias = current.bias;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  best.train_history = std::move(history);
  best.best_epoch = best_epoch;
  for (double w : best.weights) {
    if (!std::isfinite(w)) throw Error("train: non-finite weight");
  }
  return best;
}

double gradient_check(const TrainConfig& config, const Dataset& probe, double step,
                      std::size_t n_coordinates) {
  if (probe.samples.size() > 20) throw Error("gradient_check: probe must have at most 20 samples");
  if (probe.samples.empty()) throw Error("gradient_check: empty probe");
  const auto data = featurize(probe, config.n_buckets);

  Rng rng(SeedBuilder(config.rng_seed).add("gradient_check").seed());
  TrainedModel model = TrainedModel::zeros(probe.labels, config.n_buckets);
  for (double& w : model.weights) w = 0.2 * (rng.uniform() - 0.5);
  for (double& b : model.bias) b = 0.2 * (rng.uniform() - 0.5);

  Gradient grad;
  loss_and_gradient(model, data, config.l2_penalty, &grad);

  // Candidate coordinates: weights on buckets the probe touches, and biases.
  // Index >= weights.size() denotes a bias coordinate.
  std::set<std::size_t> active;
  for (const auto& s : data) {
    for (std::uint32_t b : s.x.index) {
      for (std::size_t k = 0; k < model.n_labels(); ++k) active.insert(k * config.n_buckets + b);
    }
  }
  std::vector<std::size_t> pool(active.begin(), active.end());
  for (std::size_t k = 0; k < model.n_labels(); ++k) pool.push_back(model.weights.size() + k);
  while (pool.size() < n_coordinates) pool.push_back(rng.below(model.weights.size()));
  std::vector<std::size_t> chosen;
  for (std::size_t i : rng.sample_indices(pool.size(), std::min(n_coordinates, pool.size()))) {
    chosen.push_back(pool[i]);
  }

  double worst = 0.0;
  for (std::size_t c : chosen) {
    const bool is_bias = c >= model.weights.size();
    double& param = is_bias ? model.bias[c - model.weights.size()] : model.weights[c];
    const double analytic = is_bias ? grad.bias[c - model.weights.size()] : grad.weights[c];
    const double saved = param;
    param = saved + step;
    const double up = loss_and_gradient(model, data, config.l2_penalty, nullptr);
    param = saved - step;
    const double down = loss_and_gradient(model, data, config.l2_penalty, nullptr);
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("model file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof u);
  put_u64(out, u);
}

double get_f64(std::istream& in) {
  const std::uint64_t u = get_u64(in);
  double d;
  std::memcpy(&d, &u, sizeof d);
  return d;
}

void put_str(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  if (n > (1u << 20)) throw Error("model file: implausible string length");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw Error("model file truncated");
  return s;
}

constexpr char kMagic[8] = {'R', 'O', 'S', 'E', 'M', 'D', 'L', '1'};

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, model.config_hash);
  put_u64(out, model.label_order.size());
  for (const auto& l : model.label_order.labels()) put_str(out, l);
  put_u64(out, model.n_buckets);
  for (double w : model.weights) put_f64(out, w);
  for (double b : model.bias) put_f64(out, b);
  put_u64(out, model.best_epoch);
  put_u64(out, model.train_history.size());
  for (double h : model.train_history) put_f64(out, h);
  if (!out) throw Error("error writing model file " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error("not a model file: " + path.string());
  }
  TrainedModel m;
  m.config_hash = get_u64(in);
  const std::uint64_t n_labels = get_u64(in);
  if (n_labels > 4096) throw Error("model file: implausible label count");
  std::vector<std::string> labels;
  for (std::uint64_t i = 0; i < n_labels; ++i) labels.push_back(get_str(in));
  m.label_order = LabelSet(std::move(labels));
  m.n_buckets = static_cast<std::uint32_t>(get_u64(in));
  m.weights.resize(n_labels * m.n_buckets);
  for (double& w : m.weights) w = get_f64(in);
  m.bias.resize(n_labels);
  for (double& b : m.bias) b = get_f64(in);
  m.best_epoch = get_u64(in);
  m.train_history.resize(get_u64(in));
  for (double& h : m.train_history) h = get_f64(in);
  return m;
}

void HashedLogisticClassifier::fit(const Dataset& train_data, const TrainConfig& config) {
  model_ = train(train_data, config);
}

double HashedLogisticClassifier::evaluate(const Dataset& test) const {
  return evaluate_f1(model_, test);
}

}  // namespace rose
