#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "feet/metrics.hpp"
#include "feet/probes.hpp"

using namespace feet;

namespace {

// Two or more isotropic Gaussian classes; class c has mean `means[c]`.
Examples gaussian(const std::vector<std::vector<double>>& means, std::size_t per_class, unsigned seed,
                  double noise = 1.0) {
  Examples e;
  e.dim = means[0].size();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, noise);
  std::size_t next = 0;
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::uint32_t c = 0; c < means.size(); ++c) {
      e.ids.push_back("e" + std::to_string(next++));
      e.labels.push_back(c);
      for (double m : means[c]) e.features.push_back(m + nd(gen));
    }
  return e;
}

double accuracy(const Predictions& p) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p.predicted[i] == p.true_label[i];
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

}  // namespace

TEST(Probe, GradientMatchesFiniteDifferences) {
  const auto data = gaussian({{1, 0, -1}, {0, 1, 0}, {-1, -1, 1}}, 5, 3);
  ProbeModel model = ProbeModel::zeros(3, 3);
  std::mt19937 gen(1);
  std::normal_distribution<double> nd(0, 0.5);
  for (double& w : model.weights) w = nd(gen);
  for (double& b : model.bias) b = nd(gen);
  std::vector<std::size_t> idx = {0, 2, 3, 7, 11, 14};
  std::vector<double> gw, gb, tmp_w, tmp_b;
  loss_and_gradient(model, data, idx, gw, gb);
  const double h = 1e-6;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    ProbeModel plus = model, minus = model;
    plus.weights[k] += h;
    minus.weights[k] -= h;
    const double fd = (loss_and_gradient(plus, data, idx, tmp_w, tmp_b) - loss_and_gradient(minus, data, idx, tmp_w, tmp_b)) / (2 * h);
    EXPECT_NEAR(gw[k], fd, 1e-7) << "w" << k;
  }
  for (std::size_t c = 0; c < 3; ++c) {
    ProbeModel plus = model, minus = model;
    plus.bias[c] += h;
    minus.bias[c] -= h;
    const double fd = (loss_and_gradient(plus, data, idx, tmp_w, tmp_b) - loss_and_gradient(minus, data, idx, tmp_w, tmp_b)) / (2 * h);
    EXPECT_NEAR(gb[c], fd, 1e-7) << "b" << c;
  }
}

TEST(Probe, ZeroModelLossIsLogC) {
  const auto data = gaussian({{1, 1}, {0, 0}, {2, 2}, {3, 3}}, 4, 1);
  EXPECT_NEAR(mean_loss(ProbeModel::zeros(4, 2), data), std::log(4.0), 1e-12);
  const auto p = predict(ProbeModel::zeros(4, 2), data);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (double s : p.row(i)) EXPECT_DOUBLE_EQ(s, 0.25);
    EXPECT_EQ(p.predicted[i], 0u);  // ties go to the lowest index
  }
}

TEST(Probe, TrainingLossDecreases) {
  const auto train = gaussian({{1, 0, 0, 0}, {0, 1, 0, 0}}, 100, 5);
  ProbeConfig cfg;
  cfg.max_epochs = 30;
  const auto model = train_probe(train, Examples{}, 2, cfg);
  ASSERT_EQ(model.training_log.size(), 30u);
  EXPECT_LT(model.training_log.back().train_loss, model.training_log.front().train_loss);
  EXPECT_LT(mean_loss(model, train), std::log(2.0));
  EXPECT_FALSE(model.stopped_early);
}

TEST(Probe, DeterministicGivenSeed) {
  const auto train = gaussian({{1, 0}, {0, 1}}, 50, 5);
  const auto val = gaussian({{1, 0}, {0, 1}}, 10, 6);
  ProbeConfig cfg;
  cfg.seed = 77;
  const auto a = train_probe(train, val, 2, cfg);
  const auto b = train_probe(train, val, 2, cfg);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(a.training_log, b.training_log);
  cfg.seed = 78;
  EXPECT_NE(train_probe(train, val, 2, cfg).weights, a.weights);
}

TEST(Probe, SeparatesSeparableData) {
  const auto train = gaussian({{5, 0}, {-5, 0}, {0, 5}}, 40, 1, 0.3);
  const auto test = gaussian({{5, 0}, {-5, 0}, {0, 5}}, 40, 2, 0.3);
  ProbeConfig cfg;
  cfg.max_epochs = 50;
  EXPECT_EQ(accuracy(predict(train_probe(train, Examples{}, 3, cfg), test)), 1.0);
}

TEST(Probe, ApproachesBayesAccuracy) {
  // Equal-covariance Gaussians: the Bayes rule is linear and its accuracy is
  // Phi(|mu1 - mu0| / 2). Means differ by 1.5 along one axis.
  const std::vector<std::vector<double>> means = {{0.75, 0, 0, 0, 0}, {-0.75, 0, 0, 0, 0}};
  const auto train = gaussian(means, 1000, 11);
  const auto val = gaussian(means, 200, 12);
  const auto test = gaussian(means, 5000, 13);
  const double bayes = 0.5 * std::erfc(-0.75 / std::sqrt(2.0));
  const double got = accuracy(predict(train_probe(train, val, 2, ProbeConfig{}), test));
  EXPECT_NEAR(got, bayes, 0.015) << "bayes " << bayes;
}

TEST(Probe, EarlyStoppingReturnsBestValidationSnapshot) {
  // Tiny noisy train set so validation loss turns upward.
  const std::vector<std::vector<double>> means(2, std::vector<double>(40, 0.0));
  auto m = means;
  m[0][0] = 1.5;
  m[1][0] = -1.5;
  const auto train = gaussian(m, 10, 21);
  const auto val = gaussian(m, 100, 22);
  ProbeConfig cfg;
  cfg.learning_rate = 5e-2;
  cfg.weight_decay = 0.0;
  cfg.minibatch_size = 4;
  cfg.checkpoint_every_minibatches = 2;
  cfg.patience_epochs = 5;
  const auto model = train_probe(train, val, 2, cfg);
  EXPECT_TRUE(model.stopped_early);
  EXPECT_LT(model.training_log.size(), 100u);
  const double restored = mean_loss(model, val);
  for (const auto& e : model.training_log) EXPECT_LE(restored, *e.val_loss + 1e-12);
  EXPECT_LT(restored, std::log(2.0));
}

TEST(Probe, WeightDecaySkipsBias) {
  // With zero gradient the decoupled decay shrinks weights but not biases.
  ProbeConfig cfg;
  std::vector<double> w = {1.0, -2.0}, b = {1.0};
  detail::AdamState sw(2), sb(1);
  detail::adamw_step(w, {0.0, 0.0}, sw, cfg, 0.1, 0.5, 1);
  detail::adamw_step(b, {0.0}, sb, cfg, 0.1, 0.0, 1);
  EXPECT_DOUBLE_EQ(w[0], 0.95);
  EXPECT_DOUBLE_EQ(w[1], -1.9);
  EXPECT_DOUBLE_EQ(b[0], 1.0);
}

TEST(Probe, Errors) {
  const auto train = gaussian({{1, 0}, {0, 1}}, 5, 1);
  Examples one_class = train;
  std::fill(one_class.labels.begin(), one_class.labels.end(), 0u);
  try {
    train_probe(one_class, Examples{}, 2, ProbeConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassTrain);
  }
  const auto model = ProbeModel::zeros(2, 3);
  try {
    predict(model, train);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
  Examples inf = train;
  inf.features[0] = 1e308;
  ProbeConfig cfg;
  cfg.learning_rate = 1e300;
  EXPECT_THROW(train_probe(inf, Examples{}, 2, cfg), Error);
  cfg = ProbeConfig{};
  cfg.patience_epochs = 0;
  EXPECT_THROW(train_probe(train, Examples{}, 2, cfg), Error);
}

TEST(Probe, UntrainedHeadIsSeeded) {
  EXPECT_EQ(untrained_probe(3, 8, 1).weights, untrained_probe(3, 8, 1).weights);
  EXPECT_NE(untrained_probe(3, 8, 1).weights, untrained_probe(3, 8, 2).weights);
}

TEST(Similarity, CosineIsScaleInvariant) {
  const auto support = gaussian({{2, 0, 1}, {0, 2, -1}}, 6, 4);
  auto queries = gaussian({{2, 0, 1}, {0, 2, -1}}, 10, 5);
  const auto base = classify_similarity(support, queries, 2, SimilarityMode::NearestNeighbor, SimilarityMeasure::Cosine);
  auto scaled = queries;
  for (std::size_t i = 0; i < scaled.size(); ++i)
    for (std::size_t j = 0; j < scaled.dim; ++j) scaled.features[i * scaled.dim + j] *= 3.0 + static_cast<double>(i);
  const auto again = classify_similarity(support, scaled, 2, SimilarityMode::NearestNeighbor, SimilarityMeasure::Cosine);
  EXPECT_EQ(base.predictions.predicted, again.predictions.predicted);
  for (std::size_t k = 0; k < base.predictions.scores.size(); ++k)
    EXPECT_NEAR(base.predictions.scores[k], again.predictions.scores[k], 1e-12);
}

TEST(Similarity, NearestNeighborMatchesBruteForce) {
  const auto support = gaussian({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 4, 8);
  const auto queries = gaussian({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 20, 9);
  for (auto measure : {SimilarityMeasure::Cosine, SimilarityMeasure::NegEuclidean}) {
    const auto r = classify_similarity(support, queries, 3, SimilarityMode::NearestNeighbor, measure);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      double best = -1e300;
      std::uint32_t label = 0;
      for (std::size_t s = 0; s < support.size(); ++s) {
        double v;
        const auto a = queries.row(q), b = support.row(s);
        if (measure == SimilarityMeasure::Cosine) {
          double dot = 0, na = 0, nb = 0;
          for (int j = 0; j < 3; ++j) dot += a[j] * b[j], na += a[j] * a[j], nb += b[j] * b[j];
          v = dot / std::sqrt(na * nb);
        } else {
          double s2 = 0;
          for (int j = 0; j < 3; ++j) s2 += (a[j] - b[j]) * (a[j] - b[j]);
          v = -std::sqrt(s2);
        }
        if (v > best) best = v, label = support.labels[s];
      }
      EXPECT_EQ(r.predictions.predicted[q], label) << q;
    }
  }
}

TEST(Similarity, CentroidAndZeroVectors) {
  Examples support;
  support.dim = 2;
  support.ids = {"a", "b", "c"};
  support.labels = {0, 0, 1};
  support.features = {1, 0, 3, 0, 0, 1};
  Examples q;
  q.dim = 2;
  q.ids = {"q1", "q2"};
  q.labels = {0, 1};
  q.features = {0, 0, 0.1, 0.9};
  const auto r = classify_similarity(support, q, 3, SimilarityMode::NearestCentroid, SimilarityMeasure::NegEuclidean);
  EXPECT_EQ(r.predictions.predicted[1], 1u);
  EXPECT_DOUBLE_EQ(r.predictions.score(0, 2), 0.0);  // class 2 absent from support
  const auto c = classify_similarity(support, q, 2, SimilarityMode::NearestCentroid, SimilarityMeasure::Cosine);
  ASSERT_EQ(c.findings.size(), 1u);
  EXPECT_DOUBLE_EQ(c.predictions.score(0, 0), 0.5);
}
