#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "rose/classifier.hpp"
#include "rose/hashing.hpp"

using namespace rose;

namespace {

// Balanced random probe; a few tokens are label-specific.
Dataset probe(std::uint64_t seed, std::size_t per_label, std::size_t n_labels = 3) {
  Rng rng(seed);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n_labels; ++k) names.push_back("L" + std::to_string(k));
  Dataset d;
  d.labels = LabelSet(names);
  for (std::size_t i = 0; i < per_label * n_labels; ++i) {
    const std::size_t k = i % n_labels;
    std::string text;
    const std::size_t len = 3 + rng.below(5);
    for (std::size_t t = 0; t < len; ++t) {
      text += (rng.bernoulli(0.5) ? "w" + std::to_string(k) + "_" : "s") + std::to_string(rng.below(6)) + " ";
    }
    d.samples.push_back({"p" + std::to_string(i), text, names[k], {}, {}, {}});
  }
  return d;
}

Dataset separable(std::size_t per_label) {
  Dataset d;
  d.labels = LabelSet({"pos", "neg"});
  for (std::size_t i = 0; i < per_label; ++i) {
    d.samples.push_back({"a" + std::to_string(i), "good great fine " + std::to_string(i % 3), "pos", {}, {}, {}});
    d.samples.push_back({"b" + std::to_string(i), "bad awful poor " + std::to_string(i % 3), "neg", {}, {}, {}});
  }
  return d;
}

// F1 per label straight from the definition, over label strings.
double reference_macro_f1(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                          const std::vector<std::string>& labels) {
  double sum = 0;
  for (const auto& l : labels) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == l && gold[i] == l) ++tp;
      if (pred[i] == l && gold[i] != l) ++fp;
      if (pred[i] != l && gold[i] == l) ++fn;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0;
    sum += p + r > 0 ? 2 * p * r / (p + r) : 0;
  }
  return sum / static_cast<double>(labels.size());
}

}  // namespace

TEST(MacroF1, Examples) {
  const LabelSet ab({"A", "B"});
  const std::vector<std::string> gold{"A", "A", "B", "B"};
  const std::vector<std::string> pred{"A", "B", "B", "B"};
  const auto r = macro_f1(gold, pred, ab);
  EXPECT_NEAR(r.per_label_f1.at("A"), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.per_label_f1.at("B"), 0.8, 1e-12);
  EXPECT_NEAR(r.macro_f1, 0.7333333333333333, 1e-9);
  EXPECT_EQ(r.confusion, (std::vector<std::vector<std::size_t>>{{1, 1}, {0, 2}}));
  EXPECT_EQ(macro_f1(gold, gold, ab).macro_f1, 1.0);
  const std::vector<std::string> wrong{"B", "B", "A", "A"};
  EXPECT_EQ(macro_f1(gold, wrong, ab).macro_f1, 0.0);
  EXPECT_THROW(macro_f1(gold, std::vector<std::string>{"A"}, ab), Error);
}

TEST(MacroF1, MatchesReferenceAndInvariances) {
  const std::vector<std::string> names{"x", "y", "z"};
  const LabelSet ls(names);
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(15);
    std::vector<std::string> gold, pred;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(names[rng.below(3)]);
      pred.push_back(names[rng.below(3)]);
    }
    const auto r = macro_f1(gold, pred, ls);
    EXPECT_NEAR(r.macro_f1, reference_macro_f1(gold, pred, names), 1e-12);

    double mean = 0;
    for (const auto& [l, f] : r.per_label_f1) mean += f;
    EXPECT_NEAR(r.macro_f1, mean / 3, 1e-12);
    for (std::size_t k = 0; k < 3; ++k) {
      std::size_t row = 0, col = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        row += r.confusion[k][j];
        col += r.confusion[j][k];
      }
      EXPECT_EQ(row, static_cast<std::size_t>(std::count(gold.begin(), gold.end(), names[k])));
      EXPECT_EQ(col, static_cast<std::size_t>(std::count(pred.begin(), pred.end(), names[k])));
    }

    // Permuting pairs.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<std::string> g2, p2;
    for (std::size_t i : perm) {
      g2.push_back(gold[i]);
      p2.push_back(pred[i]);
    }
    EXPECT_EQ(macro_f1(g2, p2, ls).macro_f1, r.macro_f1);

    // Relabeling bijection x->q, y->r, z->p.
    const std::map<std::string, std::string> bij{{"x", "q"}, {"y", "r"}, {"z", "p"}};
    std::vector<std::string> g3, p3;
    for (std::size_t i = 0; i < n; ++i) {
      g3.push_back(bij.at(gold[i]));
      p3.push_back(bij.at(pred[i]));
    }
    EXPECT_NEAR(macro_f1(g3, p3, LabelSet({"q", "r", "p"})).macro_f1, r.macro_f1, 1e-15);
  }
}

TEST(GradientCheck, RandomProbesStayUnderTolerance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg;
    cfg.rng_seed = seed;
    cfg.n_buckets = 64;
    EXPECT_LT(gradient_check(cfg, probe(seed, 6), 1e-5, 20), 1e-4) << seed;
    cfg.l2_penalty = 0.0;
    cfg.n_buckets = 1u << 15;
    EXPECT_LT(gradient_check(cfg, probe(seed + 100, 5, 4), 1e-5, 30), 1e-4) << seed;
  }
}

TEST(Gradient, ClosedFormAtOrigin) {
  const LabelSet ls({"a", "b", "c", "d"});
  const TrainedModel m = TrainedModel::zeros(ls, 32);
  const std::vector<FeaturizedSample> batch{{SparseVector{}, 2}};
  Gradient g;
  const double loss = loss_and_gradient(m, batch, 0.0, &g);
  EXPECT_NEAR(loss, std::log(4.0), 1e-15);
  EXPECT_EQ(g.bias, (std::vector<double>{0.25, 0.25, -0.75, 0.25}));
  for (double w : g.weights) EXPECT_EQ(w, 0.0);
}

TEST(Gradient, PenaltyTermIsLinear) {
  const Dataset d = probe(4, 4);
  const auto data = featurize(d, 128);
  TrainedModel m = TrainedModel::zeros(d.labels, 128);
  Rng rng(8);
  for (double& w : m.weights) w = rng.uniform() - 0.5;
  Gradient g0, g1;
  loss_and_gradient(m, data, 0.0, &g0);
  loss_and_gradient(m, data, 0.3, &g1);
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    EXPECT_NEAR(g1.weights[i] - g0.weights[i], 0.3 * m.weights[i], 1e-14);
  }
  EXPECT_EQ(g0.bias, g1.bias);
}

TEST(Training, FullBatchLossDecreasesAtSmallStep) {
  const Dataset d = probe(21, 10, 2);
  ASSERT_EQ(d.samples.size(), 20u);
  const auto data = featurize(d, 1u << 15);
  TrainedModel m = TrainedModel::zeros(d.labels, 1u << 15);
  double prev = loss_and_gradient(m, data, 1e-4, nullptr);
  for (int step = 0; step < 10; ++step) {
    Gradient g;
    loss_and_gradient(m, data, 1e-4, &g);
    apply_gradient(m, g, 1e-4);
    const double now = loss_and_gradient(m, data, 1e-4, nullptr);
    EXPECT_LT(now, prev) << step;
    prev = now;
  }
}

TEST(Training, SparseStepMatchesDenseStep) {
  const Dataset d = probe(2, 5);
  const auto data = featurize(d, 256);
  TrainedModel dense = TrainedModel::zeros(d.labels, 256);
  Rng rng(1);
  for (double& w : dense.weights) w = rng.uniform() - 0.5;
  for (double& b : dense.bias) b = rng.uniform() - 0.5;
  TrainedModel sparse = dense;
  for (int step = 0; step < 5; ++step) {
    Gradient g;
    loss_and_gradient(dense, data, 0.01, &g);
    apply_gradient(dense, g, 0.05);
    sparse_step(sparse, data, 0.05, 0.01);
  }
  for (std::size_t i = 0; i < dense.weights.size(); ++i) EXPECT_NEAR(sparse.weights[i], dense.weights[i], 1e-12);
  for (std::size_t k = 0; k < dense.bias.size(); ++k) EXPECT_NEAR(sparse.bias[k], dense.bias[k], 1e-12);
}

TEST(Training, SeparableDataIsLearned) {
  const Dataset d = separable(40);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  const TrainedModel m = train(d, cfg);
  EXPECT_EQ(evaluate_f1(m, d), 1.0);
  for (double w : m.weights) ASSERT_TRUE(std::isfinite(w));
  EXPECT_EQ(m.label_order, d.labels);
}

TEST(Training, DeterministicAndSeedSensitive) {
  const Dataset d = probe(9, 30);
  TrainConfig cfg;
  cfg.rng_seed = 5;
  const TrainedModel a = train(d, cfg);
  EXPECT_EQ(a, train(d, cfg));
  cfg.rng_seed = 6;
  EXPECT_NE(a.weights, train(d, cfg).weights);
}

TEST(Training, EarlyStoppingKeepsBestEpoch) {
  const Dataset d = separable(30);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.patience = 2;
  cfg.max_epochs = 50;
  const TrainedModel m = train(d, cfg);
  ASSERT_GE(m.best_epoch, 1u);
  ASSERT_LE(m.best_epoch, m.train_history.size());
  // Perfect validation F1 cannot improve, so training stops patience epochs later.
  EXPECT_EQ(m.train_history.size(), m.best_epoch + cfg.patience);
  const double best = *std::max_element(m.train_history.begin(), m.train_history.end());
  EXPECT_EQ(m.train_history[m.best_epoch - 1], best);
}

TEST(Training, RejectsBadInput) {
  Dataset d = separable(10);
  d.samples.pop_back();
  EXPECT_THROW(train(d, TrainConfig{}), Error);
  TrainConfig bad;
  bad.patience = 60;
  EXPECT_THROW(bad.validate(), Error);
  bad = TrainConfig{};
  bad.validation_fraction = 1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Predict, TieBreakAndShiftInvariance) {
  const LabelSet ls({"first", "second", "third"});
  TrainedModel m = TrainedModel::zeros(ls, 16);
  const std::vector<Sample> s{{"e", "", "first", {}, std::vector<std::string>{}, {}}};
  EXPECT_EQ(predict(m, s), (std::vector<std::string>{"first"}));
  m.bias = {0.1, 0.7, 0.3};
  EXPECT_EQ(predict(m, s), (std::vector<std::string>{"second"}));
  for (double& b : m.bias) b += 12.5;
  EXPECT_EQ(predict(m, s), (std::vector<std::string>{"second"}));
}

TEST(ModelFile, RoundTripsBitExactly) {
  TrainConfig cfg;
  cfg.n_buckets = 512;
  const TrainedModel m = train(probe(3, 20), cfg);
  const auto path = std::filesystem::temp_directory_path() / "rose_model.bin";
  save_model(m, path);
  EXPECT_EQ(load_model(path), m);
  std::filesystem::remove(path);
}

TEST(Classifier, InterfaceWrapsTraining) {
  HashedLogisticClassifier c;
  const Dataset d = separable(20);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  c.fit(d, cfg);
  EXPECT_EQ(c.evaluate(d), evaluate_f1(c.model(), d));
}
