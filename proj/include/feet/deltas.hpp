#pragma once

// Differentials against the frozen baseline, in percentage points, with a
// paired bootstrap significance test over shared test examples.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "feet/error.hpp"
#include "feet/metrics.hpp"
#include "feet/predictions.hpp"

namespace feet {

inline constexpr double kSignificanceLevel = 0.05;

struct DeltaResult {
  std::string metric;
  std::string column;  // "fewshot:<k>" or "finetuned"
  std::optional<double> delta;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  bool significant = false;
  std::size_t replicates = 0;
  std::size_t undefined_resamples = 0;

  bool operator==(const DeltaResult&) const = default;
};

// cell - frozen on the 0-100 scale; nullopt if either side is undefined.
inline std::optional<double> compute_delta(const MetricEstimate& cell, const MetricEstimate& frozen) {
  if (cell.name != frozen.name)
    throw Error(ErrorCode::MetricMismatch, "cannot subtract " + frozen.name + " from " + cell.name);
  if (!cell.point || !frozen.point) return std::nullopt;
  return 100.0 * (*cell.point - *frozen.point);
}

// Two-sided bootstrap p-value from a distribution of differences:
// 2 * min(P(d <= 0), P(d >= 0)), clamped to [1/B, 1].
inline double bootstrap_p_value(std::span<const double> deltas, std::size_t replicates) {
  if (deltas.empty()) return 1.0;
  std::size_t le = 0, ge = 0;
  for (double d : deltas) {
    if (d <= 0.0) ++le;
    if (d >= 0.0) ++ge;
  }
  const double m = static_cast<double>(deltas.size());
  const double p = 2.0 * std::min(static_cast<double>(le) / m, static_cast<double>(ge) / m);
  return std::clamp(p, 1.0 / static_cast<double>(replicates), 1.0);
}

// Paired bootstrap: every replicate draws one resample of test ids and scores
// the cell (averaged over its support-draw replicates) and the frozen
// predictions on that same resample.
inline DeltaResult paired_delta_test(std::span<const Predictions> cell, const Predictions& frozen,
                                     const MetricSpec& metric, const BootstrapConfig& cfg, std::string column = {}) {
  if (cell.empty()) throw Error(ErrorCode::EmptyPredictions, "no cell predictions");
  const Predictions& ref = cell.front();
  if (ref.size() == 0) throw Error(ErrorCode::EmptyPredictions, "no cell predictions");
  for (const auto& p : cell)
    if (p.ids != ref.ids) throw Error(ErrorCode::IdMismatch, "cell replicates cover different test ids");
  if (frozen.size() != ref.size()) throw Error(ErrorCode::IdMismatch, "cell and frozen test sets differ in size");

  // Align frozen rows to the cell's id order.
  std::unordered_map<std::string_view, std::size_t> frozen_pos;
  for (std::size_t i = 0; i < frozen.size(); ++i) frozen_pos.emplace(frozen.ids[i], i);
  std::vector<std::size_t> to_frozen(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const auto it = frozen_pos.find(ref.ids[i]);
    if (it == frozen_pos.end()) throw Error(ErrorCode::IdMismatch, "id '" + ref.ids[i] + "' missing from frozen predictions");
    to_frozen[i] = it->second;
  }

  std::vector<std::size_t> mapped;
  const ResampleStatistic stat = [&](std::span<const std::size_t> idx) -> std::optional<double> {
    double cell_sum = 0.0;
    for (const auto& p : cell) {
      const auto v = metric.evaluate(p, idx);
      if (!v) return std::nullopt;
      cell_sum += *v;
    }
    mapped.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) mapped[k] = to_frozen[idx[k]];
    const auto f = metric.evaluate(frozen, mapped);
    if (!f) return std::nullopt;
    return 100.0 * (cell_sum / static_cast<double>(cell.size()) - *f);
  };

  DeltaResult result;
  result.metric = std::string(metric.id());
  result.column = std::move(column);
  result.replicates = cfg.replicates;
  result.delta = stat(detail::all_indices(ref.size()));
  if (!result.delta) return result;

  const auto dist = bootstrap_distribution(ref.size(), stat, cfg);
  result.undefined_resamples = dist.undefined;
  if (dist.values.empty())
    throw Error(ErrorCode::AllResamplesUndefined, result.metric + ": delta undefined on every bootstrap resample");
  const auto ci = percentile_interval(dist.values);
  result.ci_low = ci.low;
  result.ci_high = ci.high;
  result.p_value = bootstrap_p_value(dist.values, cfg.replicates);
  result.significant = result.p_value < kSignificanceLevel;
  return result;
}

inline DeltaResult paired_delta_test(const Predictions& cell, const Predictions& frozen, const MetricSpec& metric,
                                     const BootstrapConfig& cfg, std::string column = {}) {
  return paired_delta_test(std::span<const Predictions>(&cell, 1), frozen, metric, cfg, std::move(column));
}

}  // namespace feet
