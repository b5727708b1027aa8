#pragma once

// Linear probe (multinomial logistic regression trained with AdamW and a
// linear learning-rate decay) and the support-set similarity classifier.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feet/error.hpp"
#include "feet/predictions.hpp"
#include "feet/rng.hpp"

namespace feet {

struct ProbeConfig {
  double learning_rate = 1e-2;
  int max_epochs = 100;
  int patience_epochs = 10;
  int checkpoint_every_minibatches = 50;
  std::size_t minibatch_size = 32;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0) || max_epochs <= 0 || patience_epochs <= 0 || checkpoint_every_minibatches <= 0 ||
        minibatch_size == 0 || weight_decay < 0 || !(epsilon > 0))
      throw Error(ErrorCode::InvalidArgument, "probe config values must be positive");
    if (patience_epochs > max_epochs) throw Error(ErrorCode::InvalidArgument, "patience_epochs exceeds max_epochs");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw Error(ErrorCode::InvalidArgument, "Adam betas must be in [0,1)");
  }
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;            // mean minibatch loss over the epoch
  std::optional<double> val_loss;     // at epoch end, if validation data exists

  bool operator==(const EpochLog&) const = default;
};

struct ProbeModel {
  std::uint32_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // row-major num_classes x dim
  std::vector<double> bias;
  std::vector<EpochLog> training_log;
  // Global minibatch step of the restored snapshot (0 = initial parameters).
  std::size_t restored_step = 0;
  bool stopped_early = false;

  static ProbeModel zeros(std::uint32_t num_classes, std::size_t dim) {
    return {num_classes, dim, std::vector<double>(num_classes * dim, 0.0), std::vector<double>(num_classes, 0.0), {}, 0, false};
  }
};

// Mean multinomial cross-entropy over `indices` and its gradient with respect
// to (weights, bias). Gradients are written into grad_w / grad_b (resized).
inline double loss_and_gradient(const ProbeModel& model, const Examples& data, std::span<const std::size_t> indices,
                                std::vector<double>& grad_w, std::vector<double>& grad_b) {
  const std::size_t C = model.num_classes;
  const std::size_t d = model.dim;
  grad_w.assign(C * d, 0.0);
  grad_b.assign(C, 0.0);
  if (indices.empty()) return 0.0;
  std::vector<double> logits(C), probs(C);
  double loss = 0.0;
  for (std::size_t i : indices) {
    const auto x = data.row(i);
    for (std::size_t c = 0; c < C; ++c) {
      const double* w = model.weights.data() + c * d;
      double z = model.bias[c];
      for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
      logits[c] = z;
    }
    softmax(logits, probs);
    const std::uint32_t y = data.labels[i];
    double top = logits[0];
    for (double z : logits) top = std::max(top, z);
    double lse = 0.0;
    for (double z : logits) lse += std::exp(z - top);
    loss += top + std::log(lse) - logits[y];
    for (std::size_t c = 0; c < C; ++c) {
      const double g = probs[c] - (c == y ? 1.0 : 0.0);
      grad_b[c] += g;
      double* gw = grad_w.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (double& g : grad_w) g *= inv;
  for (double& g : grad_b) g *= inv;
  return loss * inv;
}

inline double mean_loss(const ProbeModel& model, const Examples& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> gw, gb;
  return loss_and_gradient(model, data, all, gw, gb);
}

namespace detail {

struct AdamState {
  std::vector<double> m, v;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One decoupled-weight-decay Adam update; `decay` is 0 for biases.
inline void adamw_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
                       const ProbeConfig& cfg, double lr, double decay, std::size_t t) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * decay * params[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

}  // namespace detail

// Trains a linear probe on `train`, early-stopping on `val` when it is
// non-empty. Parameters are snapshotted every checkpoint_every_minibatches
// steps and at each epoch end; the lowest-validation-loss snapshot is
// returned. Without validation data all max_epochs run and the final
// parameters are returned. Single-threaded and deterministic given cfg.seed.
inline ProbeModel train_probe(const Examples& train, const Examples& val, std::uint32_t num_classes,
                              const ProbeConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw Error(ErrorCode::SingleClassTrain, "empty training set");
  if (val.size() > 0 && val.dim != train.dim)
    throw Error(ErrorCode::DimMismatch, "validation dim " + std::to_string(val.dim) + " vs train dim " + std::to_string(train.dim));
  {
    std::vector<bool> present(num_classes, false);
    std::size_t distinct = 0;
    for (auto y : train.labels) {
      if (y >= num_classes) throw Error(ErrorCode::InvalidArgument, "label out of range");
      if (!present[y]) present[y] = true, ++distinct;
    }
    if (distinct < 2) throw Error(ErrorCode::SingleClassTrain, "training labels contain a single class");
  }

  ProbeModel model = ProbeModel::zeros(num_classes, train.dim);
  const bool use_val = val.size() > 0;
  ProbeModel best = model;
  double best_val = use_val ? mean_loss(model, val) : std::numeric_limits<double>::infinity();

  const std::size_t n = train.size();
  const std::size_t steps_per_epoch = (n + cfg.minibatch_size - 1) / cfg.minibatch_size;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(cfg.max_epochs);

  detail::AdamState adam_w(model.weights.size()), adam_b(model.bias.size());
  std::vector<double> grad_w, grad_b;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);

  std::size_t step = 0;
  int epochs_without_improvement = 0;
  auto checkpoint = [&]() -> bool {
    const double loss = mean_loss(model, val);
    if (loss < best_val) {
      best_val = loss;
      best.weights = model.weights;
      best.bias = model.bias;
      best.restored_step = step;
      return true;
    }
    return false;
  };

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    bool improved = false;
    for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
      const std::size_t stop = std::min(n, start + cfg.minibatch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const double loss = loss_and_gradient(model, train, batch, grad_w, grad_b);
      if (!std::isfinite(loss))
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + " step " + std::to_string(step));
      epoch_loss += loss * static_cast<double>(batch.size());
      const double lr = cfg.learning_rate * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
      ++step;
      detail::adamw_step(model.weights, grad_w, adam_w, cfg, lr, cfg.weight_decay, step);
      detail::adamw_step(model.bias, grad_b, adam_b, cfg, lr, 0.0, step);
      if (use_val && step % static_cast<std::size_t>(cfg.checkpoint_every_minibatches) == 0) improved |= checkpoint();
    }
    EpochLog log{epoch, epoch_loss / static_cast<double>(n), std::nullopt};
    if (use_val) {
      improved |= checkpoint();
      log.val_loss = mean_loss(model, val);
    }
    model.training_log.push_back(log);
    if (use_val) {
      epochs_without_improvement = improved ? 0 : epochs_without_improvement + 1;
      if (epochs_without_improvement >= cfg.patience_epochs) {
        model.stopped_early = true;
        break;
      }
    }
  }

  if (!use_val) {
    model.restored_step = step;
    return model;
  }
  best.training_log = std::move(model.training_log);
  best.stopped_early = model.stopped_early;
  return best;
}

// Randomly initialised head that is never trained (the "untrained frozen head"
// configuration). Weights ~ N(0, 1/dim), bias 0.
inline ProbeModel untrained_probe(std::uint32_t num_classes, std::size_t dim, std::uint64_t seed) {
  ProbeModel model = ProbeModel::zeros(num_classes, dim);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& w : model.weights) w = rng.normal() * scale;
  return model;
}

inline Predictions predict(const ProbeModel& model, const Examples& queries) {
  if (queries.size() > 0 && queries.dim != model.dim)
    throw Error(ErrorCode::DimMismatch,
                "query dim " + std::to_string(queries.dim) + " vs model dim " + std::to_string(model.dim));
  const std::size_t C = model.num_classes;
  std::vector<double> logits(queries.size() * C);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto x = queries.row(i);
    for (std::size_t c = 0; c < C; ++c) {
      const double* w = model.weights.data() + c * model.dim;
      double z = model.bias[c];
      for (std::size_t j = 0; j < model.dim; ++j) z += w[j] * x[j];
      logits[i * C + c] = z;
    }
  }
  return predictions_from_logits(queries.ids, logits, queries.labels, model.num_classes);
}

enum class SimilarityMode { NearestNeighbor, NearestCentroid };
enum class SimilarityMeasure { Cosine, NegEuclidean };

inline double similarity(std::span<const double> a, std::span<const double> b, SimilarityMeasure measure) {
  if (measure == SimilarityMeasure::NegEuclidean) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return -std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  if (na == 0.0 || nb == 0.0) return -std::numeric_limits<double>::infinity();
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct SimilarityResult {
  Predictions predictions;
  std::vector<Finding> findings;
};

// Classifies each query by similarity to the support set. Nearest-neighbour
// takes the per-class maximum similarity over support examples; nearest-
// centroid compares against per-class mean embeddings. Scores are the softmax
// of the per-class similarities; classes absent from the support score 0.
inline SimilarityResult classify_similarity(const Examples& support, const Examples& queries, std::uint32_t num_classes,
                                            SimilarityMode mode, SimilarityMeasure measure) {
  if (support.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty support set");
  if (queries.size() > 0 && queries.dim != support.dim)
    throw Error(ErrorCode::DimMismatch,
                "query dim " + std::to_string(queries.dim) + " vs support dim " + std::to_string(support.dim));
  const std::size_t d = support.dim;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  SimilarityResult result;

  std::vector<double> centroids;
  std::vector<std::size_t> class_counts(num_classes, 0);
  if (mode == SimilarityMode::NearestCentroid) {
    centroids.assign(num_classes * d, 0.0);
    for (std::size_t i = 0; i < support.size(); ++i) {
      const auto y = support.labels[i];
      ++class_counts[y];
      const auto x = support.row(i);
      for (std::size_t j = 0; j < d; ++j) centroids[y * d + j] += x[j];
    }
    for (std::size_t c = 0; c < num_classes; ++c)
      if (class_counts[c] > 0)
        for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] /= static_cast<double>(class_counts[c]);
  }

  std::size_t zero_pairs = 0;
  std::vector<double> logits(queries.size() * num_classes, neg_inf);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    double* row = logits.data() + q * num_classes;
    const auto x = queries.row(q);
    if (mode == SimilarityMode::NearestNeighbor) {
      for (std::size_t s = 0; s < support.size(); ++s) {
        const double sim = similarity(x, support.row(s), measure);
        if (sim == neg_inf) ++zero_pairs;
        row[support.labels[s]] = std::max(row[support.labels[s]], sim);
      }
    } else {
      for (std::size_t c = 0; c < num_classes; ++c) {
        if (class_counts[c] == 0) continue;
        const double sim = similarity(x, std::span<const double>(centroids.data() + c * d, d), measure);
        if (sim == neg_inf) ++zero_pairs;
        row[c] = sim;
      }
    }
  }
  if (zero_pairs > 0)
    result.findings.push_back(warning("cosine similarity undefined for " + std::to_string(zero_pairs) +
                                      " zero-vector pair(s); scored as -inf"));
  result.predictions = predictions_from_logits(queries.ids, logits, queries.labels, num_classes);
  return result;
}

}  // namespace feet
