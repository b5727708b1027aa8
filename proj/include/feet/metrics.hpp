#pragma once

// Classification metrics (confusion-based and rank-based) and the seeded
// percentile bootstrap used for every reported confidence interval.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feet/error.hpp"
#include "feet/predictions.hpp"
#include "feet/rng.hpp"

namespace feet {

enum class MetricName { Accuracy, Precision, Recall, F1, Auroc, Auprc };

struct MetricInfo {
  MetricName name;
  std::string_view id;
  std::string_view display;
  bool higher_is_better;
};

inline constexpr MetricInfo kMetricRegistry[] = {
    {MetricName::Accuracy, "accuracy", "Accuracy", true},
    {MetricName::Precision, "precision", "Precision", true},
    {MetricName::Recall, "recall", "Recall", true},
    {MetricName::F1, "f1", "F1 Score", true},
    {MetricName::Auroc, "auroc", "AUROC", true},
    {MetricName::Auprc, "auprc", "AUPRC", true},
};

inline const MetricInfo& metric_info(MetricName name) {
  for (const auto& info : kMetricRegistry)
    if (info.name == name) return info;
  return kMetricRegistry[0];
}

inline MetricName parse_metric(std::string_view id) {
  for (const auto& info : kMetricRegistry)
    if (info.id == id) return info.name;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(id) + "'");
}

// How precision/recall/F1 are combined across classes. Weighted averages
// per-class scores by true-class support; binary reports pos_class only.
enum class Averaging { Macro, Micro, Weighted, Binary };

inline Averaging parse_averaging(std::string_view s) {
  if (s == "macro") return Averaging::Macro;
  if (s == "micro") return Averaging::Micro;
  if (s == "weighted") return Averaging::Weighted;
  if (s == "binary") return Averaging::Binary;
  throw Error(ErrorCode::InvalidArgument, "unknown averaging '" + std::string(s) + "'");
}

inline std::string_view to_string(Averaging a) {
  switch (a) {
    case Averaging::Macro: return "macro";
    case Averaging::Micro: return "micro";
    case Averaging::Weighted: return "weighted";
    case Averaging::Binary: return "binary";
  }
  return "macro";
}

struct ConfusionMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<Finding> findings;
};

namespace detail {

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

inline double harmonic(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace detail

// Confusion metrics over the examples selected by `idx` (repeats allowed, as
// in a bootstrap resample). Precision with no predicted positives is 0 and
// recorded as a finding. Macro and weighted averages run over the classes
// that occur in either the true or the predicted labels.
inline ConfusionMetrics confusion_metrics(const Predictions& preds, std::span<const std::size_t> idx,
                                          Averaging averaging, std::uint32_t pos_class = 1) {
  if (idx.empty()) throw Error(ErrorCode::EmptyPredictions, "no predictions to score");
  const std::uint32_t C = preds.num_classes;
  std::vector<std::size_t> tp(C, 0), pred_count(C, 0), true_count(C, 0);
  std::size_t correct = 0;
  for (std::size_t i : idx) {
    const auto y = preds.true_label[i];
    const auto p = preds.predicted[i];
    ++true_count[y];
    ++pred_count[p];
    if (y == p) ++tp[y], ++correct;
  }
  ConfusionMetrics out;
  const double n = static_cast<double>(idx.size());
  out.accuracy = static_cast<double>(correct) / n;

  auto class_precision = [&](std::uint32_t c) {
    if (pred_count[c] == 0) {
      out.findings.push_back(warning("class " + std::to_string(c) + " has no predicted positives; precision set to 0"));
      return 0.0;
    }
    return static_cast<double>(tp[c]) / static_cast<double>(pred_count[c]);
  };
  auto class_recall = [&](std::uint32_t c) {
    return true_count[c] == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(true_count[c]);
  };

  switch (averaging) {
    case Averaging::Micro:
      out.precision = out.recall = out.f1 = out.accuracy;
      break;
    case Averaging::Binary: {
      if (pos_class >= C) throw Error(ErrorCode::InvalidArgument, "pos_class out of range");
      out.precision = class_precision(pos_class);
      out.recall = class_recall(pos_class);
      out.f1 = detail::harmonic(out.precision, out.recall);
      break;
    }
    case Averaging::Macro:
    case Averaging::Weighted: {
      double wsum = 0.0;
      for (std::uint32_t c = 0; c < C; ++c) {
        if (true_count[c] == 0 && pred_count[c] == 0) continue;
        const double w = averaging == Averaging::Macro ? 1.0 : static_cast<double>(true_count[c]);
        if (w == 0.0) continue;
        const double p = class_precision(c);
        const double r = class_recall(c);
        out.precision += w * p;
        out.recall += w * r;
        out.f1 += w * detail::harmonic(p, r);
        wsum += w;
      }
      out.precision /= wsum;
      out.recall /= wsum;
      out.f1 /= wsum;
      break;
    }
  }
  return out;
}

inline ConfusionMetrics confusion_metrics(const Predictions& preds, Averaging averaging, std::uint32_t pos_class = 1) {
  const auto idx = detail::all_indices(preds.size());
  return confusion_metrics(preds, idx, averaging, pos_class);
}

// Mann-Whitney AUROC with average ranks for tied scores. nullopt when only
// one class is present. Labels: nonzero = positive.
inline std::optional<double> auroc(std::span<const double> scores, std::span<const int> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order = detail::all_indices(n);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]] != 0) pos_rank_sum += avg_rank, ++n_pos;
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

// Step-wise average precision: the mean, over positives, of precision at each
// positive's rank in descending-score order. Ties keep input order.
inline std::optional<double> auprc(std::span<const double> scores, std::span<const int> positive) {
  std::vector<std::size_t> order = detail::all_indices(scores.size());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (positive[order[r]] == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

struct RankMetrics {
  std::optional<double> auroc;
  std::optional<double> auprc;
};

// One-vs-rest reduction on the pos_class score column.
inline RankMetrics multiclass_rank_metrics(const Predictions& preds, std::span<const std::size_t> idx,
                                           std::uint32_t pos_class) {
  if (pos_class >= preds.num_classes) throw Error(ErrorCode::InvalidArgument, "pos_class out of range");
  std::vector<double> scores;
  std::vector<int> pos;
  scores.reserve(idx.size());
  pos.reserve(idx.size());
  for (std::size_t i : idx) {
    scores.push_back(preds.score(i, pos_class));
    pos.push_back(preds.true_label[i] == pos_class ? 1 : 0);
  }
  return {auroc(scores, pos), auprc(scores, pos)};
}

inline RankMetrics multiclass_rank_metrics(const Predictions& preds, std::uint32_t pos_class) {
  const auto idx = detail::all_indices(preds.size());
  return multiclass_rank_metrics(preds, idx, pos_class);
}

// A fully configured metric: name plus averaging / positive class.
struct MetricSpec {
  MetricName name = MetricName::Accuracy;
  Averaging averaging = Averaging::Weighted;
  std::uint32_t pos_class = 1;

  std::string_view id() const { return metric_info(name).id; }

  std::optional<double> evaluate(const Predictions& preds, std::span<const std::size_t> idx) const {
    switch (name) {
      case MetricName::Accuracy: return confusion_metrics(preds, idx, averaging, pos_class).accuracy;
      case MetricName::Precision: return confusion_metrics(preds, idx, averaging, pos_class).precision;
      case MetricName::Recall: return confusion_metrics(preds, idx, averaging, pos_class).recall;
      case MetricName::F1: return confusion_metrics(preds, idx, averaging, pos_class).f1;
      case MetricName::Auroc: return multiclass_rank_metrics(preds, idx, pos_class).auroc;
      case MetricName::Auprc: return multiclass_rank_metrics(preds, idx, pos_class).auprc;
    }
    return std::nullopt;
  }

  std::optional<double> evaluate(const Predictions& preds) const {
    return evaluate(preds, detail::all_indices(preds.size()));
  }
};

struct BootstrapConfig {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
};

struct MetricEstimate {
  std::string name;
  std::optional<double> point;  // nullopt = undefined, rendered as a dash
  double ci_low = 0.0;
  double ci_high = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t undefined_resamples = 0;

  bool defined() const noexcept { return point.has_value(); }
  bool operator==(const MetricEstimate&) const = default;
};

// Resample r draws n indices with replacement from Rng(derive_seed(seed, r)),
// so replicate values do not depend on evaluation order.
inline std::vector<std::size_t> bootstrap_resample(std::size_t n, std::uint64_t seed, std::size_t replicate) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(replicate)));
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
  return idx;
}

// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted values.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct PercentileInterval {
  double low = 0.0;
  double high = 0.0;
};

inline PercentileInterval percentile_interval(std::vector<double> values, double level = 0.95) {
  std::sort(values.begin(), values.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile_sorted(values, tail), quantile_sorted(values, 1.0 - tail)};
}

// Statistic evaluated on a resample (index list into the shared test set).
using ResampleStatistic = std::function<std::optional<double>(std::span<const std::size_t>)>;

struct BootstrapDistribution {
  std::vector<double> values;  // defined replicates, in replicate order
  std::size_t undefined = 0;
};

inline BootstrapDistribution bootstrap_distribution(std::size_t n, const ResampleStatistic& stat,
                                                    const BootstrapConfig& cfg) {
  if (cfg.replicates == 0) throw Error(ErrorCode::InvalidArgument, "bootstrap replicate count must be >= 1");
  BootstrapDistribution dist;
  dist.values.reserve(cfg.replicates);
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    const auto idx = bootstrap_resample(n, cfg.seed, r);
    if (auto v = stat(idx))
      dist.values.push_back(*v);
    else
      ++dist.undefined;
  }
  return dist;
}

// Point value on the full sample with a percentile-bootstrap 95% interval.
// Replicates holds one prediction set per support draw over the same test
// ids; the statistic is the mean over replicates (a single set in the usual
// case). Resamples on which the metric is undefined are dropped and counted.
inline MetricEstimate bootstrap_ci(std::span<const Predictions> replicates, const MetricSpec& metric,
                                   const BootstrapConfig& cfg) {
  if (replicates.empty() || replicates.front().size() == 0)
    throw Error(ErrorCode::EmptyPredictions, "no predictions to bootstrap");
  const std::size_t n = replicates.front().size();
  for (const auto& p : replicates)
    if (p.ids != replicates.front().ids) throw Error(ErrorCode::IdMismatch, "replicates cover different test ids");

  const ResampleStatistic stat = [&](std::span<const std::size_t> idx) -> std::optional<double> {
    double sum = 0.0;
    for (const auto& p : replicates) {
      const auto v = metric.evaluate(p, idx);
      if (!v) return std::nullopt;
      sum += *v;
    }
    return sum / static_cast<double>(replicates.size());
  };

  MetricEstimate est;
  est.name = std::string(metric.id());
  est.n = n;
  est.replicates = cfg.replicates;
  est.seed = cfg.seed;
  est.point = stat(detail::all_indices(n));
  if (!est.point) return est;

  const auto dist = bootstrap_distribution(n, stat, cfg);
  est.undefined_resamples = dist.undefined;
  if (dist.values.empty())
    throw Error(ErrorCode::AllResamplesUndefined, est.name + ": metric undefined on every bootstrap resample");
  const auto ci = percentile_interval(dist.values);
  est.ci_low = ci.low;
  est.ci_high = ci.high;
  est.half_width = (ci.high - ci.low) / 2.0;
  return est;
}

inline MetricEstimate bootstrap_ci(const Predictions& preds, const MetricSpec& metric, const BootstrapConfig& cfg) {
  return bootstrap_ci(std::span<const Predictions>(&preds, 1), metric, cfg);
}

}  // namespace feet
