#pragma once

// Stratified train/val/test splitting and nested, stratified few-shot support
// sets on the 2^1..2^N schedule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "feet/error.hpp"
#include "feet/rng.hpp"

namespace feet {

using LabelMap = std::unordered_map<std::string, std::uint32_t>;

struct Split {
  // Each list is sorted lexicographically.
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;

  bool operator==(const Split&) const = default;
};

struct ShotSchedule {
  int max_exponent = 10;
  std::vector<std::size_t> sizes;

  bool operator==(const ShotSchedule&) const = default;
};

struct SupportSet {
  std::size_t k = 0;
  std::vector<std::string> ids;
  std::uint64_t seed = 0;
  std::vector<Finding> findings;
};

inline std::uint64_t derive_cell_seed(std::uint64_t master_seed, std::string_view cell_key) {
  return derive_seed(master_seed, cell_key);
}

namespace detail {

// Largest-remainder apportionment of `total` over `weights` (sum > 0).
// Remainder ties are broken by `tie_order` (a permutation of class indices).
inline std::vector<std::size_t> apportion(std::size_t total, std::span<const std::size_t> weights,
                                          std::span<const std::size_t> tie_order) {
  const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> out(weights.size(), 0);
  if (sum == 0) return out;
  std::vector<std::size_t> rem(weights.size(), 0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    out[c] = total * weights[c] / sum;
    rem[c] = total * weights[c] % sum;
    assigned += out[c];
  }
  std::vector<std::size_t> rank(tie_order.size());
  for (std::size_t i = 0; i < tie_order.size(); ++i) rank[tie_order[i]] = i;
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rem[a] != rem[b]) return rem[a] > rem[b];
    return rank[a] < rank[b];
  });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % order.size()]];
  return out;
}

inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

inline std::vector<std::size_t> class_permutation(std::size_t num_classes, Rng& rng) {
  std::vector<std::size_t> order(num_classes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  return order;
}

}  // namespace detail

// Stratified split: round(train_frac*n) examples go to train+val, apportioned
// over classes by largest remainder; round(val_frac*|train+val|) of those are
// carved out for validation the same way. Ids are sorted before shuffling,
// so the input order never matters.
inline Split make_split(std::span<const std::string> ids, std::span<const std::uint32_t> labels, double train_frac,
                        double val_frac_of_train, std::uint64_t seed, std::uint32_t num_classes = 0) {
  if (ids.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "ids and labels differ in length");
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error(ErrorCode::InvalidArgument, "train_frac must be in (0,1)");
  if (!(val_frac_of_train >= 0.0 && val_frac_of_train < 1.0))
    throw Error(ErrorCode::InvalidArgument, "val_frac_of_train must be in [0,1)");
  if (num_classes == 0)
    for (auto l : labels) num_classes = std::max(num_classes, l + 1);

  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (ids[order[i]] == ids[order[i - 1]]) throw Error(ErrorCode::DuplicateId, "duplicate id '" + ids[order[i]] + "'");

  std::vector<std::vector<std::string>> by_class(num_classes);
  for (std::size_t i : order) {
    if (labels[i] >= num_classes) throw Error(ErrorCode::InvalidArgument, "label out of range");
    by_class[labels[i]].push_back(ids[i]);
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (by_class[c].empty()) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no examples");

  Rng rng(seed);
  for (auto& members : by_class) rng.shuffle(std::span(members));
  const auto tie_order = detail::class_permutation(num_classes, rng);

  const std::size_t n = ids.size();
  std::size_t trainval = detail::round_half_up(train_frac * static_cast<double>(n));
  trainval = std::clamp<std::size_t>(trainval, 1, n > 1 ? n - 1 : 1);

  std::vector<std::size_t> class_sizes(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) class_sizes[c] = by_class[c].size();
  const auto tv_counts = detail::apportion(trainval, class_sizes, tie_order);
  const std::size_t val_total = detail::round_half_up(val_frac_of_train * static_cast<double>(trainval));
  const auto val_counts = detail::apportion(val_total, tv_counts, tie_order);

  Split split;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& members = by_class[c];
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i < val_counts[c])
        split.val_ids.push_back(members[i]);
      else if (i < tv_counts[c])
        split.train_ids.push_back(members[i]);
      else
        split.test_ids.push_back(members[i]);
    }
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

inline ShotSchedule make_schedule(int max_exponent, std::size_t train_size) {
  if (max_exponent < 1 || max_exponent > 62) throw Error(ErrorCode::InvalidArgument, "max_exponent must be in [1,62]");
  ShotSchedule schedule{max_exponent, {}};
  for (int e = 1; e <= max_exponent; ++e) {
    const std::size_t size = std::size_t{1} << e;
    if (size <= train_size || e == 1) schedule.sizes.push_back(size);
  }
  return schedule;
}

// The full support ordering for a cell seed: each class's train ids are
// shuffled, classes are visited round-robin in a seeded order, and exhausted
// classes are skipped. Every support set is a prefix of this sequence, which
// is what makes supports nested across shot sizes.
inline std::vector<std::string> support_sequence(const Split& split, const LabelMap& labels, std::uint32_t num_classes,
                                                 std::uint64_t cell_seed) {
  std::vector<std::vector<std::string>> by_class(num_classes);
  for (const auto& id : split.train_ids) {
    const auto it = labels.find(id);
    if (it == labels.end()) throw Error(ErrorCode::InvalidArgument, "no label for id '" + id + "'");
    if (it->second >= num_classes) throw Error(ErrorCode::InvalidArgument, "label out of range for '" + id + "'");
    by_class[it->second].push_back(id);
  }
  Rng rng(cell_seed);
  for (auto& members : by_class) {
    std::sort(members.begin(), members.end());
    rng.shuffle(std::span(members));
  }
  const auto class_order = detail::class_permutation(num_classes, rng);

  std::vector<std::string> sequence;
  sequence.reserve(split.train_ids.size());
  for (std::size_t round = 0; sequence.size() < split.train_ids.size(); ++round)
    for (std::size_t c : class_order)
      if (round < by_class[c].size()) sequence.push_back(by_class[c][round]);
  return sequence;
}

inline SupportSet draw_support(const Split& split, const LabelMap& labels, std::uint32_t num_classes, std::size_t k,
                               std::uint64_t cell_seed) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "support size must be positive");
  if (k > split.train_ids.size())
    throw Error(ErrorCode::InsufficientExamples,
                "k=" + std::to_string(k) + " exceeds train size " + std::to_string(split.train_ids.size()));
  auto sequence = support_sequence(split, labels, num_classes, cell_seed);
  sequence.resize(k);

  SupportSet support{k, std::move(sequence), cell_seed, {}};
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& id : support.ids) ++counts[labels.at(id)];
  const std::size_t floor_quota = k / num_classes;
  for (std::size_t c = 0; c < num_classes; ++c)
    if (counts[c] < floor_quota)
      support.findings.push_back(warning("k=" + std::to_string(k) + ": class " + std::to_string(c) + " short by " +
                                         std::to_string(floor_quota - counts[c]) + ", filled from other classes"));
  return support;
}

}  // namespace feet
