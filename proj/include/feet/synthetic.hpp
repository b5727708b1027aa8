#pragma once

// Synthetic Gaussian-cluster embeddings with known structure, plus two
// bundled fixtures: a shot-curve task where more support helps, and a
// small-data task where fine-tuning a wide probe loses to the frozen head.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "feet/embedding_io.hpp"
#include "feet/rng.hpp"

namespace feet::synthetic {

struct ClusterSpec {
  std::string model_id = "model";
  std::string task_id = "task";
  Regime regime = Regime::Frozen;
  std::uint32_t dim = 16;
  std::uint32_t num_classes = 2;
  std::uint32_t informative = 4;  // leading dims carrying the class signal
  std::vector<std::size_t> class_sizes = {100, 100};
  double separation = 1.0;  // class mean offset per informative dim
  double noise = 1.0;
  std::uint64_t seed = 0;
};

inline std::string example_id(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "ex%05zu", i);
  return buf;
}

// Class c has mean +-separation/2 on each informative dim, signs drawn per
// class from `structure_seed`; every dim gets N(0, noise^2) on top. Ids and
// labels depend only on class_sizes.
inline EmbeddingSet make_clusters(const ClusterSpec& spec, std::uint64_t structure_seed) {
  Rng structure(structure_seed);
  std::vector<std::vector<double>> means(spec.num_classes, std::vector<double>(spec.dim, 0.0));
  for (std::uint32_t c = 0; c < spec.num_classes; ++c)
    for (std::uint32_t d = 0; d < spec.informative && d < spec.dim; ++d)
      means[c][d] = (structure.below(2) == 0 ? 0.5 : -0.5) * spec.separation;
  // two classes always sit on opposite sides
  if (spec.num_classes == 2)
    for (std::uint32_t d = 0; d < spec.dim; ++d) means[1][d] = -means[0][d];

  EmbeddingSet set;
  set.model_id = spec.model_id;
  set.task_id = spec.task_id;
  set.regime = spec.regime;
  set.dim = spec.dim;
  set.num_classes = spec.num_classes;
  set.metadata = {{"generator", "gaussian-clusters"}, {"separation", spec.separation}};
  Rng rng(spec.seed);
  std::size_t next = 0;
  for (std::uint32_t c = 0; c < spec.num_classes; ++c)
    for (std::size_t i = 0; i < spec.class_sizes.at(c); ++i) {
      EmbeddingRecord r;
      r.id = example_id(next++);
      r.label = c;
      r.vector.resize(spec.dim);
      for (std::uint32_t d = 0; d < spec.dim; ++d)
        r.vector[d] = static_cast<float>(means[c][d] + spec.noise * rng.normal());
      set.records.push_back(std::move(r));
    }
  return set;
}

namespace detail {

inline std::string file_name(const ClusterSpec& s) {
  return s.model_id + "." + s.task_id + "." + std::string(to_string(s.regime)) + ".jsonl";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

}  // namespace detail

// Two models on one three-class task. Frozen and few-shot share the frozen
// file; fine-tuned files are better separated. Returns the manifest path.
inline std::filesystem::path write_trend_fixture(const std::filesystem::path& dir, std::uint64_t seed,
                                                 std::size_t support_replicates = 3) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  const std::vector<std::pair<std::string, double>> models = {{"encoder-small", 1.2}, {"encoder-large", 1.6}};
  std::uint64_t k = 0;
  for (const auto& [model, sep] : models) {
    for (Regime regime : {Regime::Frozen, Regime::FineTuned}) {
      ClusterSpec spec;
      spec.model_id = model;
      spec.task_id = "clusters";
      spec.regime = regime;
      spec.dim = 24;
      spec.num_classes = 3;
      spec.informative = 6;
      spec.class_sizes = {240, 200, 160};
      spec.separation = regime == Regime::FineTuned ? sep * 1.5 : sep;
      spec.seed = derive_seed(seed, ++k);
      const auto set = make_clusters(spec, derive_seed(seed, model));
      save_embedding_set(dir / detail::file_name(spec), set);
      cells.push_back({{"model", model}, {"task", "clusters"}, {"regime", to_string(regime)}, {"file", detail::file_name(spec)}});
    }
  }
  nlohmann::ordered_json m;
  m["run_id"] = "synthetic-trend";
  m["master_seed"] = seed;
  m["models"] = {"encoder-small", "encoder-large"};
  m["tasks"] = {{{"task_id", "clusters"}, {"metrics", {"accuracy", "precision", "recall", "f1", "auroc", "auprc"}}}};
  m["schedule"] = {{"max_exponent", 8}};
  m["replicates"] = support_replicates;
  m["bootstrap"] = {{"replicates", 1000}};
  m["probe"] = {{"learning_rate", 0.01}, {"max_epochs", 60}, {"patience_epochs", 8}};
  m["finetuned_probe"] = {{"learning_rate", 0.01}, {"max_epochs", 60}, {"patience_epochs", 8}};
  m["cells"] = cells;
  const auto path = dir / "manifest.json";
  detail::write_text(path, m.dump(2) + "\n");
  return path;
}

// 512-dim embeddings with the class signal in 16 dims and only 32 training
// examples. The frozen head is a nearest-centroid classifier; the fine-tuned
// column trains an unregularized probe over all 512 dims on the same vectors
// and overfits. Returns the manifest path.
inline std::filesystem::path write_degradation_fixture(const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  ClusterSpec spec;
  spec.model_id = "wide-encoder";
  spec.task_id = "sparse-signal";
  spec.dim = 512;
  spec.num_classes = 2;
  spec.informative = 16;
  spec.class_sizes = {516, 516};
  spec.separation = 1.0;
  spec.seed = derive_seed(seed, std::string_view("vectors"));
  auto set = make_clusters(spec, derive_seed(seed, std::string_view("structure")));
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (Regime regime : {Regime::Frozen, Regime::FineTuned}) {
    spec.regime = set.regime = regime;
    save_embedding_set(dir / detail::file_name(spec), set);
    cells.push_back({{"model", spec.model_id}, {"task", spec.task_id}, {"regime", to_string(regime)}, {"file", detail::file_name(spec)}});
  }
  nlohmann::ordered_json m;
  m["run_id"] = "synthetic-degradation";
  m["master_seed"] = seed;
  m["models"] = {spec.model_id};
  m["tasks"] = {{{"task_id", spec.task_id}, {"metrics", {"accuracy", "f1"}}}};
  m["schedule"] = {{"max_exponent", 5}};
  m["split"] = {{"train_fraction", 32.0 / 1032.0}, {"val_fraction_of_train", 0.0}};
  m["bootstrap"] = {{"replicates", 1000}};
  m["frozen_head"] = "nearest_centroid";
  m["fewshot_strategy"] = "similarity";
  m["probe"] = {{"learning_rate", 0.01}, {"max_epochs", 200}, {"weight_decay", 0.0}};
  m["finetuned_probe"] = {{"learning_rate", 0.01}, {"max_epochs", 200}, {"weight_decay", 0.0}};
  m["cells"] = cells;
  const auto path = dir / "manifest.json";
  detail::write_text(path, m.dump(2) + "\n");
  return path;
}

}  // namespace feet::synthetic
