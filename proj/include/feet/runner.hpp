#pragma once

// Protocol orchestration: expands a manifest into cells, executes them on a
// bounded worker pool, persists per-cell results as they complete, and
// aggregates metrics, deltas and reports. Output bytes depend only on the
// manifest, the embedding files and the master seed.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "feet/deltas.hpp"
#include "feet/embedding_io.hpp"
#include "feet/manifest.hpp"
#include "feet/metrics.hpp"
#include "feet/probes.hpp"
#include "feet/reporting.hpp"
#include "feet/results.hpp"
#include "feet/sampling.hpp"

namespace feet {

inline constexpr std::string_view kToolVersion = "1.0.0";

struct CellKey {
  std::string model_id;
  std::string task_id;
  Regime regime = Regime::Frozen;
  std::optional<std::uint32_t> shot;
  std::size_t replicate = 0;

  // Canonical "model|task|regime|shot|replicate"; shot is "-" when absent.
  std::string str() const {
    return model_id + "|" + task_id + "|" + std::string(to_string(regime)) + "|" +
           (shot ? std::to_string(*shot) : std::string("-")) + "|" + std::to_string(replicate);
  }

  bool operator==(const CellKey&) const = default;
};

// Shot sizes per task, clipped to that task's train size when known.
using TrainSizes = std::map<std::string, std::size_t>;

// Canonical cell order: models and tasks in manifest order, then frozen,
// few-shot by ascending shot and replicate, then fine-tuned (when mapped).
inline std::vector<CellKey> expand_cells(const RunManifest& m, const TrainSizes& train_sizes = {}) {
  std::vector<CellKey> keys;
  for (const auto& model : m.models) {
    for (const auto& task : m.tasks) {
      if (!m.find(model, task.task_id, Regime::Frozen)) continue;
      keys.push_back({model, task.task_id, Regime::Frozen, std::nullopt, 0});
      const auto it = train_sizes.find(task.task_id);
      const std::size_t train = it == train_sizes.end() ? std::numeric_limits<std::size_t>::max() : it->second;
      for (std::size_t k : make_schedule(m.max_exponent, train).sizes)
        for (std::size_t r = 0; r < m.replicates; ++r)
          keys.push_back({model, task.task_id, Regime::FewShot, static_cast<std::uint32_t>(k), r});
      if (m.find(model, task.task_id, Regime::FineTuned))
        keys.push_back({model, task.task_id, Regime::FineTuned, std::nullopt, 0});
    }
  }
  return keys;
}

enum class CellStatus { Pending, Done, Failed };

inline std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Pending: return "pending";
    case CellStatus::Done: return "done";
    case CellStatus::Failed: return "failed";
  }
  return "pending";
}

struct CellState {
  std::string key;
  CellStatus status = CellStatus::Pending;
  std::string error;
};

struct RunState {
  std::string run_id;
  std::string manifest_hash;
  std::uint64_t master_seed = 0;
  std::string tool_version = std::string(kToolVersion);
  std::string started_at;
  std::string finished_at;
  std::vector<CellState> cells;
  std::vector<Finding> validation;
  bool refused = false;      // validation errors, nothing executed
  bool interrupted = false;  // stopped before all cells ran

  bool finished() const { return !finished_at.empty(); }
  std::size_t count(CellStatus s) const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [s](const CellState& c) { return c.status == s; }));
  }
};

struct RunOptions {
  std::size_t parallelism = 1;
  bool resume = false;
  // Stop after this many newly executed cells (simulates an interruption).
  std::optional<std::size_t> stop_after;
};

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string file_stem(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_') ? c : '_';
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
    out << bytes;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::ordered_json predictions_json(const Predictions& p) {
  nlohmann::ordered_json j;
  j["format"] = "FEET-PRED";
  j["version"] = 1;
  j["num_classes"] = p.num_classes;
  j["records"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto row = p.row(i);
    j["records"].push_back({{"id", p.ids[i]}, {"label", p.true_label[i]}, {"scores", std::vector<double>(row.begin(), row.end())}});
  }
  return j;
}

template <typename Json>
Predictions predictions_from_json(const Json& j) {
  if (j.value("format", std::string{}) != "FEET-PRED")
    throw Error(ErrorCode::MalformedRecord, "predictions document must have format FEET-PRED");
  const auto C = j.at("num_classes").template get<std::uint32_t>();
  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<std::uint32_t> labels;
  for (const auto& r : j.at("records")) {
    ids.push_back(r.at("id").template get<std::string>());
    labels.push_back(r.at("label").template get<std::uint32_t>());
    const auto row = r.at("scores").template get<std::vector<double>>();
    if (row.size() != C) throw Error(ErrorCode::DimMismatch, "score row length differs from num_classes");
    if (labels.back() >= C) throw Error(ErrorCode::MalformedRecord, "label out of range");
    scores.insert(scores.end(), row.begin(), row.end());
  }
  return predictions_from_scores(std::move(ids), std::move(scores), std::move(labels), C);
}

}  // namespace detail

// Predictions file used by `feet metrics`: {"format":"FEET-PRED","version":1,
// "num_classes":C,"records":[{"id","label","scores":[...]}]}.
inline Predictions load_predictions(const std::filesystem::path& path) {
  return detail::predictions_from_json(nlohmann::json::parse(detail::read_file(path)));
}

inline void save_predictions(const std::filesystem::path& path, const Predictions& p) {
  detail::write_file(path, detail::predictions_json(p).dump() + "\n");
}

// Per-(model, task) context shared by that pair's cells.
struct TaskContext {
  const TaskSpec* task = nullptr;
  std::uint32_t num_classes = 0;
  Split split;
  LabelMap labels;
};

struct CellOutput {
  Predictions predictions;
  std::vector<EpochLog> training_log;
  std::vector<Finding> findings;
};

// Seeds. Split and support seeds ignore the model so every model sees the same
// test set and the same support examples; the support seed also ignores the
// shot so supports are nested across the schedule.
inline std::uint64_t split_seed(std::uint64_t master, std::string_view task) {
  return derive_cell_seed(master, "*|" + std::string(task) + "|split|-|0");
}
inline std::uint64_t support_seed(std::uint64_t master, std::string_view task, std::size_t replicate) {
  return derive_cell_seed(master, "*|" + std::string(task) + "|support|-|" + std::to_string(replicate));
}
inline std::uint64_t bootstrap_seed(std::uint64_t master, std::string_view task) {
  return derive_cell_seed(master, "*|" + std::string(task) + "|bootstrap|-|0");
}

inline TaskContext make_task_context(const RunManifest& m, const TaskSpec& task, const EmbeddingSet& frozen) {
  TaskContext ctx;
  ctx.task = &task;
  ctx.num_classes = frozen.num_classes;
  std::vector<std::string> ids;
  std::vector<std::uint32_t> labels;
  for (const auto& r : frozen.records) {
    ids.push_back(r.id);
    labels.push_back(r.label);
    ctx.labels.emplace(r.id, r.label);
  }
  ctx.split = make_split(ids, labels, m.train_fraction, m.val_fraction_of_train, split_seed(m.master_seed, task.task_id),
                         frozen.num_classes);
  return ctx;
}

// Runs one cell: builds the classifier its regime calls for and predicts the
// shared test split.
inline CellOutput run_cell(const RunManifest& m, const CellKey& key, const TaskContext& ctx, const EmbeddingSet& set) {
  CellOutput out;
  const Examples test = gather(set, ctx.split.test_ids);
  const std::uint64_t seed = derive_cell_seed(m.master_seed, key.str());

  auto train_and_predict = [&](const Examples& train, const Examples& val, ProbeConfig cfg) {
    cfg.seed = seed;
    const auto model = train_probe(train, val, ctx.num_classes, cfg);
    out.training_log = model.training_log;
    out.predictions = predict(model, test);
  };

  switch (key.regime) {
    case Regime::Frozen: {
      const Examples train = gather(set, ctx.split.train_ids);
      if (m.frozen_head == FrozenHead::Probe) {
        train_and_predict(train, gather(set, ctx.split.val_ids), m.probe);
      } else if (m.frozen_head == FrozenHead::Untrained) {
        out.predictions = predict(untrained_probe(ctx.num_classes, set.dim, seed), test);
      } else {
        auto r = classify_similarity(train, test, ctx.num_classes, SimilarityMode::NearestCentroid, m.similarity_measure);
        out.predictions = std::move(r.predictions);
        out.findings = std::move(r.findings);
      }
      break;
    }
    case Regime::FewShot: {
      auto support = draw_support(ctx.split, ctx.labels, ctx.num_classes, *key.shot,
                                  support_seed(m.master_seed, key.task_id, key.replicate));
      out.findings = support.findings;
      if (m.fewshot_strategy == FewShotStrategy::Similarity) {
        auto r = classify_similarity(gather(set, support.ids), test, ctx.num_classes, m.similarity_mode,
                                     m.similarity_measure);
        out.predictions = std::move(r.predictions);
        out.findings.insert(out.findings.end(), r.findings.begin(), r.findings.end());
        break;
      }
      // Below 64 shots the whole support trains; from 64 up every fourth
      // support example is held out for early stopping.
      std::vector<std::string> train_ids, val_ids;
      for (std::size_t i = 0; i < support.ids.size(); ++i)
        (*key.shot >= 64 && i % 4 == 3 ? val_ids : train_ids).push_back(support.ids[i]);
      train_and_predict(gather(set, train_ids), gather(set, val_ids), m.probe);
      break;
    }
    case Regime::FineTuned:
      train_and_predict(gather(set, ctx.split.train_ids), gather(set, ctx.split.val_ids), m.finetuned_probe);
      break;
  }
  return out;
}

namespace detail {

inline nlohmann::ordered_json state_json(const RunState& s) {
  nlohmann::ordered_json j;
  j["run_id"] = s.run_id;
  j["manifest_hash"] = s.manifest_hash;
  j["master_seed"] = s.master_seed;
  j["tool_version"] = s.tool_version;
  j["started_at"] = s.started_at;
  j["finished_at"] = s.finished_at.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s.finished_at);
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : s.cells) j["cells"].push_back({{"key", c.key}, {"status", to_string(c.status)}, {"error", c.error}});
  return j;
}

inline RunState state_from_json(const nlohmann::json& j) {
  RunState s;
  s.run_id = j.at("run_id").get<std::string>();
  s.manifest_hash = j.at("manifest_hash").get<std::string>();
  s.master_seed = j.at("master_seed").get<std::uint64_t>();
  s.tool_version = j.at("tool_version").get<std::string>();
  s.started_at = j.at("started_at").get<std::string>();
  if (!j.at("finished_at").is_null()) s.finished_at = j.at("finished_at").get<std::string>();
  for (const auto& c : j.at("cells")) {
    const auto status = c.at("status").get<std::string>();
    s.cells.push_back({c.at("key").get<std::string>(),
                       status == "done" ? CellStatus::Done : status == "failed" ? CellStatus::Failed : CellStatus::Pending,
                       c.at("error").get<std::string>()});
  }
  return s;
}

inline std::filesystem::path cell_file(const std::filesystem::path& out_dir, std::size_t index, const CellKey& key) {
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%04zu_", index);
  return out_dir / "cells" / (prefix + file_stem(key.str()) + ".json");
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is claimed from
// a shared counter; fn must write only to slot i.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
}

}  // namespace detail

// Builds the per-column results of every (model, task) from cell predictions:
// bootstrap CIs for each metric and paired deltas against the frozen cell.
inline std::vector<CellResult> aggregate(const RunManifest& m, const std::vector<CellKey>& keys,
                                         const std::vector<std::optional<Predictions>>& preds, std::size_t parallelism) {
  struct Group {
    std::string model, task;
    Regime regime;
    std::optional<std::uint32_t> shot;
    std::vector<std::size_t> cells;  // one per replicate
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& k = keys[i];
    if (!groups.empty() && groups.back().model == k.model_id && groups.back().task == k.task_id &&
        groups.back().regime == k.regime && groups.back().shot == k.shot) {
      groups.back().cells.push_back(i);
      continue;
    }
    groups.push_back({k.model_id, k.task_id, k.regime, k.shot, {i}});
  }

  std::vector<CellResult> results(groups.size());
  detail::parallel_for(groups.size(), parallelism, [&](std::size_t g) {
    const auto& group = groups[g];
    CellResult& res = results[g];
    res.model_id = group.model;
    res.task_id = group.task;
    res.regime = group.regime;
    res.shot = group.shot;
    const auto task_it = std::find_if(m.tasks.begin(), m.tasks.end(), [&](const TaskSpec& t) { return t.task_id == group.task; });
    std::vector<Predictions> reps;
    for (std::size_t i : group.cells)
      if (preds[i]) reps.push_back(*preds[i]);
    if (reps.size() != group.cells.size() || task_it == m.tasks.end()) {
      res.empty = true;
      return;
    }
    const BootstrapConfig boot{m.bootstrap_replicates, bootstrap_seed(m.master_seed, group.task)};
    const Predictions* frozen = nullptr;
    if (group.regime != Regime::Frozen) {
      for (std::size_t i = 0; i < keys.size(); ++i)
        if (keys[i].model_id == group.model && keys[i].task_id == group.task && keys[i].regime == Regime::Frozen && preds[i])
          frozen = &*preds[i];
    }
    const std::string column = group.regime == Regime::FewShot ? "fewshot:" + std::to_string(*group.shot)
                                                               : std::string(to_string(group.regime));
    for (const auto metric : task_it->metrics) {
      const MetricSpec spec{metric, task_it->averaging, task_it->positive_class};
      MetricEstimate est;
      try {
        est = bootstrap_ci(reps, spec, boot);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AllResamplesUndefined) throw;
        est.name = std::string(spec.id());
      }
      res.metrics.push_back(est);
      if (!frozen) continue;
      DeltaResult d;
      try {
        d = paired_delta_test(reps, *frozen, spec, boot, column);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AllResamplesUndefined) throw;
        d.metric = std::string(spec.id());
        d.column = column;
      }
      res.deltas.push_back(d);
    }
  });
  // Delta points are defined as the difference of the reported point values.
  for (auto& res : results) {
    if (res.regime == Regime::Frozen || res.empty) continue;
    const auto frozen = std::find_if(results.begin(), results.end(), [&](const CellResult& r) {
      return r.model_id == res.model_id && r.task_id == res.task_id && r.regime == Regime::Frozen;
    });
    if (frozen == results.end() || frozen->empty) {
      res.deltas.clear();
      continue;
    }
    for (auto& d : res.deltas)
      if (const auto* cell = res.metric(d.metric); cell)
        if (const auto* base = frozen->metric(d.metric); base) d.delta = compute_delta(*cell, *base);
  }
  return results;
}

// Writes results.json and the per-(metric, task) FEET and delta tables.
inline void write_report(const std::filesystem::path& out_dir, const ResultsDocument& doc) {
  const auto report = out_dir / "report";
  std::filesystem::create_directories(report);
  detail::write_file(report / "results.json", dump_results(doc));
  const auto tables = build_tables(doc.cells);
  auto emit = [&](const Table& t, std::string_view kind) {
    const std::string stem = detail::file_stem(t.metric) + "." + detail::file_stem(t.task) + "." + std::string(kind);
    detail::write_file(report / (stem + ".md"), render(t, ReportFormat::Markdown));
    detail::write_file(report / (stem + ".tex"), render(t, ReportFormat::Latex));
    detail::write_file(report / (stem + ".csv"), render(t, ReportFormat::Csv));
  };
  for (const auto& t : tables.feet) emit(t, "feet");
  for (const auto& t : tables.delta) emit(t, "delta");
}

// Executes (or resumes) a run into out_dir. Validation errors refuse the run.
inline RunState execute_run(const RunManifest& m, const std::filesystem::path& out_dir, const RunOptions& opts = {}) {
  namespace fs = std::filesystem;
  RunState state;
  state.run_id = m.run_id;
  state.manifest_hash = m.source_hash;
  state.master_seed = m.master_seed;
  state.validation = validate_manifest(m);
  if (has_errors(state.validation)) {
    state.refused = true;
    return state;
  }

  const auto state_path = out_dir / "state.json";
  std::optional<RunState> previous;
  if (fs::exists(state_path)) {
    if (!opts.resume)
      throw Error(ErrorCode::InvalidArgument, out_dir.string() + " already holds a run; pass --resume to continue it");
    previous = detail::state_from_json(nlohmann::json::parse(detail::read_file(state_path)));
    if (previous->manifest_hash != m.source_hash)
      throw Error(ErrorCode::InvalidArgument, "manifest changed since the run started (hash " + previous->manifest_hash +
                                                  " vs " + m.source_hash + ")");
    if (previous->master_seed != m.master_seed)
      throw Error(ErrorCode::InvalidArgument, "master seed differs from the interrupted run");
  } else if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    throw Error(ErrorCode::InvalidArgument, out_dir.string() + " is not empty");
  }
  fs::create_directories(out_dir / "cells");
  fs::create_directories(out_dir / "logs");

  // Load every referenced file once; sets are read-only afterwards.
  std::map<std::string, EmbeddingSet> sets;
  for (const auto& c : m.cells)
    if (!sets.contains(c.path.string())) sets.emplace(c.path.string(), load_embedding_set(c.path));

  std::map<std::pair<std::string, std::string>, TaskContext> contexts;
  std::vector<Finding> findings;
  TrainSizes train_sizes;
  for (const auto& model : m.models)
    for (const auto& task : m.tasks) {
      const auto* frozen = m.find(model, task.task_id, Regime::Frozen);
      if (!frozen) continue;
      try {
        auto ctx = make_task_context(m, task, sets.at(frozen->path.string()));
        auto& size = train_sizes[task.task_id];
        size = size == 0 ? ctx.split.train_ids.size() : std::min(size, ctx.split.train_ids.size());
        contexts.emplace(std::pair(model, task.task_id), std::move(ctx));
      } catch (const Error& e) {
        findings.push_back(error_finding(model + "/" + task.task_id + ": " + e.what()));
      }
    }

  const auto keys = expand_cells(m, train_sizes);
  state.started_at = previous ? previous->started_at : detail::utc_now();
  state.cells.resize(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) state.cells[i].key = keys[i].str();
  if (previous) {
    std::map<std::string, const CellState*> prior;
    for (const auto& c : previous->cells) prior[c.key] = &c;
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (auto it = prior.find(state.cells[i].key); it != prior.end() && it->second->status == CellStatus::Done &&
                                                   fs::exists(detail::cell_file(out_dir, i, keys[i])))
        state.cells[i].status = CellStatus::Done;
  }

  std::mutex io_mutex;  // serializes cell files and state.json
  auto save_state = [&] { detail::write_file(state_path, detail::state_json(state).dump(2) + "\n"); };
  save_state();

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (state.cells[i].status != CellStatus::Done) todo.push_back(i);
  std::atomic<std::size_t> executed{0};
  std::atomic<bool> stopped{false};

  detail::parallel_for(todo.size(), opts.parallelism, [&](std::size_t t) {
    const std::size_t i = todo[t];
    if (opts.stop_after && executed.fetch_add(1) >= *opts.stop_after) {
      stopped = true;
      return;
    }
    const auto& key = keys[i];
    nlohmann::ordered_json doc;
    CellState result{key.str(), CellStatus::Done, {}};
    std::string log_lines;
    try {
      const auto ctx_it = contexts.find({key.model_id, key.task_id});
      if (ctx_it == contexts.end()) throw Error(ErrorCode::InvalidArgument, "no split available for this model/task");
      const auto* mapping = m.resolve(key.model_id, key.task_id, key.regime, key.shot);
      if (!mapping) throw Error(ErrorCode::InvalidArgument, "regime not mapped");
      const auto out = run_cell(m, key, ctx_it->second, sets.at(mapping->path.string()));
      doc["key"] = key.str();
      doc["seed"] = derive_cell_seed(m.master_seed, key.str());
      doc["predictions"] = detail::predictions_json(out.predictions);
      doc["findings"] = nlohmann::ordered_json::array();
      for (const auto& f : out.findings) doc["findings"].push_back(f.message);
      for (const auto& e : out.training_log) {
        nlohmann::ordered_json line{{"cell", key.str()}, {"epoch", e.epoch}, {"train_loss", e.train_loss}};
        line["val_loss"] = e.val_loss ? nlohmann::ordered_json(*e.val_loss) : nlohmann::ordered_json(nullptr);
        log_lines += line.dump() + "\n";
      }
    } catch (const std::exception& e) {
      result.status = CellStatus::Failed;
      result.error = e.what();
    }
    std::lock_guard lock(io_mutex);
    if (result.status == CellStatus::Done) {
      detail::write_file(out_dir / "logs" / (detail::file_stem(key.str()) + ".jsonl"), log_lines);
      detail::write_file(detail::cell_file(out_dir, i, key), doc.dump() + "\n");
    }
    state.cells[i] = result;
    save_state();
  });

  if (stopped || std::any_of(state.cells.begin(), state.cells.end(), [](const CellState& c) { return c.status == CellStatus::Pending; })) {
    state.interrupted = true;
    save_state();
    return state;
  }

  std::vector<std::optional<Predictions>> preds(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (state.cells[i].status != CellStatus::Done) {
      findings.push_back(error_finding(keys[i].str() + ": " + state.cells[i].error));
      continue;
    }
    const auto doc = nlohmann::json::parse(detail::read_file(detail::cell_file(out_dir, i, keys[i])));
    preds[i] = detail::predictions_from_json(doc.at("predictions"));
  }

  ResultsDocument results;
  results.run_id = m.run_id;
  results.manifest_hash = m.source_hash;
  results.master_seed = m.master_seed;
  results.cells = aggregate(m, keys, preds, opts.parallelism);
  // Fine-tuned columns that were never mapped still appear, as empty cells.
  for (const auto& model : m.models)
    for (const auto& task : m.tasks)
      if (m.find(model, task.task_id, Regime::Frozen) && !m.find(model, task.task_id, Regime::FineTuned)) {
        CellResult empty;
        empty.model_id = model;
        empty.task_id = task.task_id;
        empty.regime = Regime::FineTuned;
        empty.empty = true;
        auto pos = std::find_if(results.cells.begin(), results.cells.end(), [&](const CellResult& c) {
          return c.model_id == model && c.task_id == task.task_id && c.regime == Regime::FewShot;
        });
        pos = std::find_if(pos, results.cells.end(), [&](const CellResult& c) {
          return !(c.model_id == model && c.task_id == task.task_id);
        });
        results.cells.insert(pos, std::move(empty));
      }
  results.findings = state.validation;
  results.findings.insert(results.findings.end(), findings.begin(), findings.end());
  write_report(out_dir, results);

  state.finished_at = detail::utc_now();
  save_state();
  return state;
}

// Re-renders a persisted run's tables from its results.json.
inline std::string render_run(const std::filesystem::path& run_dir, ReportFormat format, bool delta) {
  const auto doc = parse_results(detail::read_file(run_dir / "report" / "results.json"));
  const auto tables = build_tables(doc.cells);
  return render(delta ? tables.delta : tables.feet, format);
}

}  // namespace feet
