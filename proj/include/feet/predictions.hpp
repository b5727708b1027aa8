#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "feet/embedding_io.hpp"
#include "feet/error.hpp"

namespace feet {

// Dense labeled examples in row-major double storage.
struct Examples {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const noexcept { return {features.data() + i * dim, dim}; }
};

// Selects `ids` from `set` in the given order.
inline Examples gather(const EmbeddingSet& set, std::span<const std::string> ids) {
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(set.records.size());
  for (std::size_t i = 0; i < set.records.size(); ++i) index.emplace(set.records[i].id, i);
  Examples out;
  out.dim = set.dim;
  out.ids.reserve(ids.size());
  out.labels.reserve(ids.size());
  out.features.reserve(ids.size() * set.dim);
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorCode::IdMismatch, "id '" + id + "' not present in " + set.model_id + "/" + set.task_id);
    const auto& rec = set.records[it->second];
    out.ids.push_back(rec.id);
    out.labels.push_back(rec.label);
    out.features.insert(out.features.end(), rec.vector.begin(), rec.vector.end());
  }
  return out;
}

// Per-example class scores (row-stochastic) with the argmax readout.
struct Predictions {
  std::uint32_t num_classes = 0;
  std::vector<std::string> ids;
  std::vector<double> scores;  // row-major, size() x num_classes
  std::vector<std::uint32_t> predicted;
  std::vector<std::uint32_t> true_label;

  std::size_t size() const noexcept { return ids.size(); }
  std::span<const double> row(std::size_t i) const noexcept { return {scores.data() + i * num_classes, num_classes}; }
  double score(std::size_t i, std::uint32_t c) const noexcept { return scores[i * num_classes + c]; }

  bool operator==(const Predictions&) const = default;
};

// Lowest index wins ties.
inline std::uint32_t argmax(std::span<const double> values) {
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < values.size(); ++c)
    if (values[c] > values[best]) best = c;
  return best;
}

// Numerically stable softmax of `logits` into `out`. Entries equal to -inf get
// probability 0; an all -inf row becomes uniform.
inline void softmax(std::span<const double> logits, std::span<double> out) {
  double top = -std::numeric_limits<double>::infinity();
  for (double z : logits) top = std::max(top, z);
  if (!std::isfinite(top)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp(logits[c] - top);
    sum += out[c];
  }
  for (double& p : out) p /= sum;
}

// Builds Predictions from raw logits (one row per id).
inline Predictions predictions_from_logits(std::vector<std::string> ids, std::span<const double> logits,
                                           std::vector<std::uint32_t> true_label, std::uint32_t num_classes) {
  Predictions p;
  p.num_classes = num_classes;
  p.ids = std::move(ids);
  p.true_label = std::move(true_label);
  const std::size_t n = p.ids.size();
  p.scores.resize(n * num_classes);
  p.predicted.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> out(p.scores.data() + i * num_classes, num_classes);
    softmax(logits.subspan(i * num_classes, num_classes), out);
    p.predicted[i] = argmax(out);
  }
  return p;
}

// Takes already-normalized scores as given (e.g. read back from disk).
inline Predictions predictions_from_scores(std::vector<std::string> ids, std::vector<double> scores,
                                           std::vector<std::uint32_t> true_label, std::uint32_t num_classes) {
  if (scores.size() != ids.size() * num_classes || true_label.size() != ids.size())
    throw Error(ErrorCode::InvalidArgument, "prediction arrays disagree in size");
  Predictions p;
  p.num_classes = num_classes;
  p.ids = std::move(ids);
  p.scores = std::move(scores);
  p.true_label = std::move(true_label);
  p.predicted.resize(p.ids.size());
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    for (double s : p.row(i))
      if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteValue, "non-finite score for '" + p.ids[i] + "'");
    p.predicted[i] = argmax(p.row(i));
  }
  return p;
}

}  // namespace feet
