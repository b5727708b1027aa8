#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

#include "feet/sampling.hpp"

using namespace feet;

namespace {

struct Labeled {
  std::vector<std::string> ids;
  std::vector<std::uint32_t> labels;
  LabelMap map;
};

Labeled make_labeled(const std::vector<std::size_t>& class_sizes) {
  Labeled out;
  std::size_t next = 0;
  for (std::uint32_t c = 0; c < class_sizes.size(); ++c)
    for (std::size_t i = 0; i < class_sizes[c]; ++i) {
      out.ids.push_back("x" + std::to_string(next++));
      out.labels.push_back(c);
      out.map[out.ids.back()] = c;
    }
  return out;
}

std::map<std::uint32_t, std::size_t> class_counts(const std::vector<std::string>& ids, const LabelMap& map) {
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& id : ids) ++counts[map.at(id)];
  return counts;
}

}  // namespace

TEST(Split, HundredExamplesGives63_7_30) {
  const auto d = make_labeled({50, 50});
  const auto s = make_split(d.ids, d.labels, 0.70, 0.10, 42);
  EXPECT_EQ(s.train_ids.size(), 63u);
  EXPECT_EQ(s.val_ids.size(), 7u);
  EXPECT_EQ(s.test_ids.size(), 30u);
}

TEST(Split, TenExamplesGives7_3) {
  const auto d = make_labeled({5, 5});
  const auto s = make_split(d.ids, d.labels, 0.70, 0.0, 1);
  EXPECT_EQ(s.train_ids.size(), 7u);
  EXPECT_TRUE(s.val_ids.empty());
  EXPECT_EQ(s.test_ids.size(), 3u);
}

TEST(Split, PartitionsAndIsStratified) {
  const auto d = make_labeled({300, 120, 80});
  const auto s = make_split(d.ids, d.labels, 0.70, 0.10, 9);
  std::set<std::string> all;
  for (const auto* part : {&s.train_ids, &s.val_ids, &s.test_ids})
    for (const auto& id : *part) EXPECT_TRUE(all.insert(id).second) << id;
  EXPECT_EQ(all.size(), d.ids.size());
  // Each class lands in train+val within one example of its exact share.
  std::vector<std::string> trainval = s.train_ids;
  trainval.insert(trainval.end(), s.val_ids.begin(), s.val_ids.end());
  const auto counts = class_counts(trainval, d.map);
  const double total = 350.0;
  const std::vector<double> share = {300 * total / 500, 120 * total / 500, 80 * total / 500};
  for (std::uint32_t c = 0; c < 3; ++c) EXPECT_LE(std::abs(static_cast<double>(counts.at(c)) - share[c]), 1.0);
}

TEST(Split, IndependentOfInputOrder) {
  auto d = make_labeled({40, 25, 35});
  const auto a = make_split(d.ids, d.labels, 0.7, 0.1, 5);
  std::vector<std::size_t> perm(d.ids.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 17, perm.end());
  std::vector<std::string> ids;
  std::vector<std::uint32_t> labels;
  for (auto i : perm) {
    ids.push_back(d.ids[i]);
    labels.push_back(d.labels[i]);
  }
  EXPECT_EQ(make_split(ids, labels, 0.7, 0.1, 5), a);
}

TEST(Split, SeedChangesSplit) {
  const auto d = make_labeled({40, 40});
  EXPECT_NE(make_split(d.ids, d.labels, 0.7, 0.1, 1), make_split(d.ids, d.labels, 0.7, 0.1, 2));
  EXPECT_EQ(make_split(d.ids, d.labels, 0.7, 0.1, 1), make_split(d.ids, d.labels, 0.7, 0.1, 1));
}

TEST(Split, Errors) {
  const auto d = make_labeled({3, 3});
  EXPECT_THROW(make_split(d.ids, d.labels, 1.0, 0.1, 0), Error);
  EXPECT_THROW(make_split(d.ids, d.labels, 0.5, 1.0, 0), Error);
  auto dup = d;
  dup.ids[1] = dup.ids[0];
  EXPECT_THROW(make_split(dup.ids, dup.labels, 0.5, 0.0, 0), Error);
  try {
    make_split(d.ids, d.labels, 0.5, 0.0, 0, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyClass);
  }
}

TEST(Schedule, ClipsToTrainSize) {
  EXPECT_EQ(make_schedule(10, 100000).sizes.size(), 10u);
  EXPECT_EQ(make_schedule(10, 100).sizes, (std::vector<std::size_t>{2, 4, 8, 16, 32, 64}));
  EXPECT_EQ(make_schedule(3, 8).sizes, (std::vector<std::size_t>{2, 4, 8}));
  EXPECT_THROW(make_schedule(0, 10), Error);
}

TEST(Support, NestedAcrossShots) {
  const auto d = make_labeled({200, 150, 90});
  const auto s = make_split(d.ids, d.labels, 0.7, 0.1, 3);
  for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
    std::vector<std::string> prev;
    for (std::size_t k : make_schedule(8, s.train_ids.size()).sizes) {
      const auto sup = draw_support(s, d.map, 3, k, seed);
      ASSERT_EQ(sup.ids.size(), k);
      const std::set<std::string> cur(sup.ids.begin(), sup.ids.end());
      EXPECT_EQ(cur.size(), k);
      for (const auto& id : prev) EXPECT_TRUE(cur.contains(id)) << "k=" << k;
      prev = sup.ids;
    }
  }
}

TEST(Support, BalancedWhenClassesAllow) {
  const auto d = make_labeled({200, 150, 90});
  const auto s = make_split(d.ids, d.labels, 0.7, 0.1, 3);
  for (std::size_t k : {3u, 6u, 30u, 60u}) {
    const auto counts = class_counts(draw_support(s, d.map, 3, k, 11).ids, d.map);
    for (auto [c, n] : counts) EXPECT_EQ(n, k / 3) << "k=" << k << " class " << c;
  }
}

TEST(Support, RemainderSpreadsOneEach) {
  // k=4 over three classes: one class gets two, the others one.
  const auto d = make_labeled({10, 10, 10});
  const auto s = make_split(d.ids, d.labels, 0.7, 0.0, 3);
  std::set<std::uint32_t> doubled;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    std::vector<std::size_t> n;
    for (auto [c, v] : class_counts(draw_support(s, d.map, 3, 4, seed).ids, d.map)) n.push_back(v);
    std::sort(n.begin(), n.end());
    EXPECT_EQ(n, (std::vector<std::size_t>{1, 1, 2}));
    for (auto [c, v] : class_counts(draw_support(s, d.map, 3, 4, seed).ids, d.map))
      if (v == 2) doubled.insert(c);
  }
  // The extra slot is not always given to the same class.
  EXPECT_EQ(doubled.size(), 3u);
}

TEST(Support, ShortClassIsFilledFromOthers) {
  const auto d = make_labeled({60, 3});
  const auto s = make_split(d.ids, d.labels, 0.7, 0.0, 1);
  const auto sup = draw_support(s, d.map, 2, 16, 4);
  const auto counts = class_counts(sup.ids, d.map);
  EXPECT_EQ(counts.at(1), 2u);
  EXPECT_EQ(counts.at(0), 14u);
  ASSERT_FALSE(sup.findings.empty());
  EXPECT_EQ(sup.findings[0].severity, Severity::Warning);
}

TEST(Support, TooLargeKIsAnError) {
  const auto d = make_labeled({5, 5});
  const auto s = make_split(d.ids, d.labels, 0.7, 0.0, 1);
  try {
    draw_support(s, d.map, 2, 8, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientExamples);
  }
}

TEST(Seeds, DeriveSeedIsStableAndCollisionFree) {
  // Pinned values guard against accidental changes to the key hash.
  EXPECT_EQ(derive_seed(0, std::string_view("")), derive_seed(0, std::string_view("")));
  EXPECT_NE(derive_seed(0, std::string_view("a")), derive_seed(1, std::string_view("a")));
  EXPECT_NE(derive_seed(0, std::string_view("ab")), derive_seed(0, std::string_view("ab\0", 3)));
  std::unordered_set<std::uint64_t> seen;
  for (int m = 0; m < 10; ++m)
    for (int t = 0; t < 10; ++t)
      for (int k = 0; k < 10; ++k)
        for (int r = 0; r < 10; ++r) {
          const std::string key = "model" + std::to_string(m) + "|task" + std::to_string(t) + "|fewshot|" +
                                  std::to_string(1 << (k + 1)) + "|" + std::to_string(r);
          EXPECT_TRUE(seen.insert(derive_cell_seed(2024, key)).second) << key;
        }
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Seeds, SplitMixReferenceValues) {
  // First outputs of SplitMix64 seeded with 1234567 (reference implementation).
  Rng rng(1234567);
  EXPECT_EQ(rng(), 6457827717110365317ULL);
  EXPECT_EQ(rng(), 3203168211198807973ULL);
  EXPECT_EQ(rng(), 9817491932198370423ULL);
}

TEST(Seeds, BelowIsUniformEnough) {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}
