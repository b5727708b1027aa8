#pragma once

// Run manifest: which embedding file backs each (model, task, regime[, shot])
// cell, plus the protocol knobs. The grammar is documented in docs/manifest.md.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "feet/embedding_io.hpp"
#include "feet/error.hpp"
#include "feet/metrics.hpp"
#include "feet/probes.hpp"
#include "feet/rng.hpp"

namespace feet {

struct TaskSpec {
  std::string task_id;
  std::vector<MetricName> metrics;
  std::uint32_t positive_class = 1;
  Averaging averaging = Averaging::Weighted;
};

enum class FewShotStrategy { Probe, Similarity };
// Classifier on top of frozen embeddings.
enum class FrozenHead { Probe, Untrained, NearestCentroid };

struct CellMapping {
  std::string model_id;
  std::string task_id;
  Regime regime = Regime::Frozen;
  std::optional<std::uint32_t> shot;
  std::filesystem::path path;  // resolved against the manifest directory
};

struct RunManifest {
  std::string run_id = "run";
  std::uint64_t master_seed = 0;
  std::vector<std::string> models;
  std::vector<TaskSpec> tasks;
  int max_exponent = 10;
  std::size_t replicates = 1;
  double train_fraction = 0.70;
  double val_fraction_of_train = 0.10;
  std::size_t bootstrap_replicates = 1000;
  FewShotStrategy fewshot_strategy = FewShotStrategy::Probe;
  SimilarityMode similarity_mode = SimilarityMode::NearestCentroid;
  SimilarityMeasure similarity_measure = SimilarityMeasure::Cosine;
  FrozenHead frozen_head = FrozenHead::Probe;
  ProbeConfig probe;
  ProbeConfig finetuned_probe;
  std::vector<CellMapping> cells;
  std::string source_hash;  // hash of the manifest bytes, hex

  const CellMapping* find(std::string_view model, std::string_view task, Regime regime,
                          std::optional<std::uint32_t> shot = std::nullopt) const {
    for (const auto& c : cells)
      if (c.model_id == model && c.task_id == task && c.regime == regime && c.shot == shot) return &c;
    return nullptr;
  }

  // Few-shot cells fall back to the frozen file when not mapped per shot.
  const CellMapping* resolve(std::string_view model, std::string_view task, Regime regime,
                             std::optional<std::uint32_t> shot = std::nullopt) const {
    if (const auto* c = find(model, task, regime, shot)) return c;
    if (regime == Regime::FewShot) {
      if (const auto* c = find(model, task, Regime::FewShot)) return c;
      return find(model, task, Regime::Frozen);
    }
    return nullptr;
  }
};

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

namespace detail {

inline void read_probe_config(const nlohmann::json& j, ProbeConfig& cfg) {
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.patience_epochs = j.value("patience_epochs", cfg.patience_epochs);
  cfg.checkpoint_every_minibatches = j.value("checkpoint_every_minibatches", cfg.checkpoint_every_minibatches);
  cfg.minibatch_size = j.value("minibatch_size", cfg.minibatch_size);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
}

}  // namespace detail

// Parses manifest JSON text. Relative cell paths resolve against base_dir.
inline RunManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  RunManifest m;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("manifest: ") + e.what());
  }
  try {
    m.source_hash = hex64(derive_seed(0, text));
    m.run_id = j.value("run_id", m.run_id);
    m.master_seed = j.value("master_seed", m.master_seed);
    m.models = j.at("models").get<std::vector<std::string>>();
    for (const auto& t : j.at("tasks")) {
      TaskSpec task;
      task.task_id = t.at("task_id").get<std::string>();
      for (const auto& name : t.value("metrics", std::vector<std::string>{"accuracy", "precision", "recall", "f1"}))
        task.metrics.push_back(parse_metric(name));
      task.positive_class = t.value("positive_class", task.positive_class);
      task.averaging = parse_averaging(t.value("averaging", std::string(to_string(task.averaging))));
      m.tasks.push_back(std::move(task));
    }
    if (j.contains("schedule")) m.max_exponent = j["schedule"].value("max_exponent", m.max_exponent);
    m.replicates = j.value("replicates", m.replicates);
    if (j.contains("split")) {
      m.train_fraction = j["split"].value("train_fraction", m.train_fraction);
      m.val_fraction_of_train = j["split"].value("val_fraction_of_train", m.val_fraction_of_train);
    }
    if (j.contains("bootstrap")) m.bootstrap_replicates = j["bootstrap"].value("replicates", m.bootstrap_replicates);

    const std::string strategy = j.value("fewshot_strategy", std::string("probe"));
    if (strategy == "probe") m.fewshot_strategy = FewShotStrategy::Probe;
    else if (strategy == "similarity") m.fewshot_strategy = FewShotStrategy::Similarity;
    else throw Error(ErrorCode::InvalidArgument, "fewshot_strategy must be probe|similarity");
    if (j.contains("similarity")) {
      const std::string mode = j["similarity"].value("mode", std::string("nearest_centroid"));
      const std::string sim = j["similarity"].value("measure", std::string("cosine"));
      if (mode == "nearest_neighbor") m.similarity_mode = SimilarityMode::NearestNeighbor;
      else if (mode == "nearest_centroid") m.similarity_mode = SimilarityMode::NearestCentroid;
      else throw Error(ErrorCode::InvalidArgument, "similarity.mode must be nearest_neighbor|nearest_centroid");
      if (sim == "cosine") m.similarity_measure = SimilarityMeasure::Cosine;
      else if (sim == "neg_euclidean") m.similarity_measure = SimilarityMeasure::NegEuclidean;
      else throw Error(ErrorCode::InvalidArgument, "similarity.measure must be cosine|neg_euclidean");
    }
    const std::string head = j.value("frozen_head", std::string("probe"));
    if (head == "probe") m.frozen_head = FrozenHead::Probe;
    else if (head == "untrained") m.frozen_head = FrozenHead::Untrained;
    else if (head == "nearest_centroid") m.frozen_head = FrozenHead::NearestCentroid;
    else throw Error(ErrorCode::InvalidArgument, "frozen_head must be probe|untrained|nearest_centroid");

    if (j.contains("probe")) detail::read_probe_config(j["probe"], m.probe);
    m.finetuned_probe = m.probe;
    if (j.contains("finetuned_probe")) detail::read_probe_config(j["finetuned_probe"], m.finetuned_probe);

    for (const auto& c : j.at("cells")) {
      CellMapping cell;
      cell.model_id = c.at("model").get<std::string>();
      cell.task_id = c.at("task").get<std::string>();
      cell.regime = parse_regime(c.at("regime").get<std::string>());
      if (c.contains("shot")) cell.shot = c["shot"].get<std::uint32_t>();
      std::filesystem::path p = c.at("file").get<std::string>();
      cell.path = p.is_absolute() ? p : base_dir / p;
      m.cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("manifest: ") + e.what());
  }
  return m;
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

// Checks the manifest against its embedding files. Returns an empty list iff
// every file loads, dims agree within each (model, task), class counts agree
// within each task, and every optional column is mapped. Findings are data.
inline std::vector<Finding> validate_manifest(const RunManifest& m) {
  std::vector<Finding> out;
  if (!(m.train_fraction > 0.0 && m.train_fraction < 1.0)) out.push_back(error_finding("train_fraction must be in (0,1)"));
  if (!(m.val_fraction_of_train >= 0.0 && m.val_fraction_of_train < 1.0))
    out.push_back(error_finding("val_fraction_of_train must be in [0,1)"));
  if (m.bootstrap_replicates < 1) out.push_back(error_finding("bootstrap replicates must be >= 1"));
  if (m.replicates < 1) out.push_back(error_finding("replicates must be >= 1"));
  if (m.max_exponent < 1 || m.max_exponent > 30) out.push_back(error_finding("schedule.max_exponent must be in [1,30]"));
  if (m.models.empty()) out.push_back(error_finding("no models listed"));
  if (m.tasks.empty()) out.push_back(error_finding("no tasks listed"));
  for (const auto* cfg : {&m.probe, &m.finetuned_probe}) {
    try {
      cfg->validate();
    } catch (const Error& e) {
      out.push_back(error_finding(std::string("probe config: ") + e.what()));
    }
  }
  for (const auto& t : m.tasks)
    if (t.metrics.empty()) out.push_back(error_finding("task " + t.task_id + " lists no metrics"));

  struct Loaded {
    std::uint32_t dim = 0;
    std::uint32_t num_classes = 0;
    std::set<std::string> ids;
  };
  std::map<std::string, Loaded> loaded;  // by path
  std::map<std::string, std::uint32_t> task_classes;

  for (const auto& c : m.cells) {
    const std::string where = c.model_id + "/" + c.task_id + "/" + std::string(to_string(c.regime)) +
                              (c.shot ? "/" + std::to_string(*c.shot) : "");
    if (std::find(m.models.begin(), m.models.end(), c.model_id) == m.models.end())
      out.push_back(warning(where + ": model not listed in models; cell ignored"));
    if (std::none_of(m.tasks.begin(), m.tasks.end(), [&](const TaskSpec& t) { return t.task_id == c.task_id; }))
      out.push_back(warning(where + ": task not listed in tasks; cell ignored"));
    if (c.shot && c.regime != Regime::FewShot) out.push_back(error_finding(where + ": shot given for a non-fewshot cell"));
    const std::string key = c.path.string();
    if (!loaded.contains(key)) {
      try {
        const auto set = load_embedding_set(c.path);
        Loaded info{set.dim, set.num_classes, {}};
        for (const auto& r : set.records) info.ids.insert(r.id);
        for (auto& f : class_coverage(set)) out.push_back(std::move(f));
        if (set.model_id != c.model_id || set.task_id != c.task_id)
          out.push_back(warning(where + ": file header names " + set.model_id + "/" + set.task_id));
        loaded.emplace(key, std::move(info));
      } catch (const Error& e) {
        out.push_back(error_finding(where + ": " + e.what()));
        continue;
      }
    }
    const auto& info = loaded.at(key);
    auto [it, inserted] = task_classes.emplace(c.task_id, info.num_classes);
    if (!inserted && it->second != info.num_classes)
      out.push_back(error_finding(where + ": num_classes " + std::to_string(info.num_classes) + " differs from " +
                                  std::to_string(it->second) + " declared elsewhere for task " + c.task_id));
    for (const auto& t : m.tasks)
      if (t.task_id == c.task_id && t.positive_class >= info.num_classes)
        out.push_back(error_finding(where + ": positive_class out of range"));
  }

  for (const auto& model : m.models) {
    for (const auto& task : m.tasks) {
      const std::string pair = model + "/" + task.task_id;
      const auto* frozen = m.find(model, task.task_id, Regime::Frozen);
      if (!frozen) {
        out.push_back(error_finding(pair + ": no frozen cell"));
        continue;
      }
      if (!m.find(model, task.task_id, Regime::FineTuned))
        out.push_back(warning(pair + ": finetuned column will be empty"));
      const auto fit = loaded.find(frozen->path.string());
      if (fit == loaded.end()) continue;
      for (const auto& c : m.cells) {
        if (c.model_id != model || c.task_id != task.task_id || &c == frozen) continue;
        const auto cit = loaded.find(c.path.string());
        if (cit == loaded.end()) continue;
        if (cit->second.dim != fit->second.dim)
          out.push_back(warning(pair + "/" + std::string(to_string(c.regime)) + ": dim differs across regimes (" +
                                std::to_string(fit->second.dim) + " vs " + std::to_string(cit->second.dim) + ")"));
        if (cit->second.ids != fit->second.ids)
          out.push_back(error_finding(pair + "/" + std::string(to_string(c.regime)) +
                                      ": record ids differ from the frozen cell; paired comparison impossible"));
      }
    }
  }
  return out;
}

inline bool has_errors(const std::vector<Finding>& findings) {
  return std::any_of(findings.begin(), findings.end(), [](const Finding& f) { return f.severity == Severity::Error; });
}

}  // namespace feet
