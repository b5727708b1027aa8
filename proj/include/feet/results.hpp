#pragma once

// Per-cell results and the versioned results document (results-v1).
// See docs/results-schema.md.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "feet/deltas.hpp"
#include "feet/embedding_io.hpp"
#include "feet/metrics.hpp"

namespace feet {

inline constexpr std::string_view kResultsSchema = "results-v1";

struct CellResult {
  std::string model_id;
  std::string task_id;
  Regime regime = Regime::Frozen;
  std::optional<std::uint32_t> shot;
  std::vector<MetricEstimate> metrics;
  std::vector<DeltaResult> deltas;  // empty for frozen cells
  bool empty = false;               // regime not mapped or cell failed; renders as a dash

  const MetricEstimate* metric(std::string_view name) const {
    for (const auto& m : metrics)
      if (m.name == name) return &m;
    return nullptr;
  }
  const DeltaResult* delta(std::string_view name) const {
    for (const auto& d : deltas)
      if (d.metric == name) return &d;
    return nullptr;
  }

  bool operator==(const CellResult&) const = default;
};

inline nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json to_json(const MetricEstimate& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["point"] = optional_number(m.point);
  j["ci_low"] = m.ci_low;
  j["ci_high"] = m.ci_high;
  j["half_width"] = m.half_width;
  j["n"] = m.n;
  j["B"] = m.replicates;
  j["seed"] = m.seed;
  j["undefined_resamples"] = m.undefined_resamples;
  return j;
}

inline nlohmann::ordered_json to_json(const DeltaResult& d) {
  nlohmann::ordered_json j;
  j["metric"] = d.metric;
  j["column"] = d.column;
  j["delta"] = optional_number(d.delta);
  j["ci_low"] = d.ci_low;
  j["ci_high"] = d.ci_high;
  j["p_value"] = d.p_value;
  j["significant"] = d.significant;
  j["B"] = d.replicates;
  j["undefined_resamples"] = d.undefined_resamples;
  return j;
}

inline nlohmann::ordered_json to_json(const CellResult& c) {
  nlohmann::ordered_json j;
  j["model_id"] = c.model_id;
  j["task_id"] = c.task_id;
  j["regime"] = to_string(c.regime);
  j["shot"] = c.shot ? nlohmann::ordered_json(*c.shot) : nlohmann::ordered_json(nullptr);
  j["empty"] = c.empty;
  j["metrics"] = nlohmann::ordered_json::array();
  for (const auto& m : c.metrics) j["metrics"].push_back(to_json(m));
  j["deltas"] = nlohmann::ordered_json::array();
  for (const auto& d : c.deltas) j["deltas"].push_back(to_json(d));
  return j;
}

namespace detail {
template <typename Json>
std::optional<double> read_optional(const Json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.template get<double>());
}
}  // namespace detail

template <typename Json>
MetricEstimate metric_from_json(const Json& j) {
  MetricEstimate m;
  m.name = j.at("name").template get<std::string>();
  m.point = detail::read_optional(j.at("point"));
  m.ci_low = j.at("ci_low").template get<double>();
  m.ci_high = j.at("ci_high").template get<double>();
  m.half_width = j.at("half_width").template get<double>();
  m.n = j.at("n").template get<std::size_t>();
  m.replicates = j.at("B").template get<std::size_t>();
  m.seed = j.at("seed").template get<std::uint64_t>();
  m.undefined_resamples = j.at("undefined_resamples").template get<std::size_t>();
  return m;
}

template <typename Json>
DeltaResult delta_from_json(const Json& j) {
  DeltaResult d;
  d.metric = j.at("metric").template get<std::string>();
  d.column = j.at("column").template get<std::string>();
  d.delta = detail::read_optional(j.at("delta"));
  d.ci_low = j.at("ci_low").template get<double>();
  d.ci_high = j.at("ci_high").template get<double>();
  d.p_value = j.at("p_value").template get<double>();
  d.significant = j.at("significant").template get<bool>();
  d.replicates = j.at("B").template get<std::size_t>();
  d.undefined_resamples = j.at("undefined_resamples").template get<std::size_t>();
  return d;
}

template <typename Json>
CellResult cell_from_json(const Json& j) {
  CellResult c;
  c.model_id = j.at("model_id").template get<std::string>();
  c.task_id = j.at("task_id").template get<std::string>();
  c.regime = parse_regime(j.at("regime").template get<std::string>());
  if (!j.at("shot").is_null()) c.shot = j.at("shot").template get<std::uint32_t>();
  c.empty = j.value("empty", false);
  for (const auto& m : j.at("metrics")) c.metrics.push_back(metric_from_json(m));
  for (const auto& d : j.at("deltas")) c.deltas.push_back(delta_from_json(d));
  return c;
}

struct ResultsDocument {
  std::string run_id;
  std::string manifest_hash;
  std::uint64_t master_seed = 0;
  std::vector<CellResult> cells;
  std::vector<Finding> findings;
};

inline std::string dump_results(const ResultsDocument& doc) {
  nlohmann::ordered_json j;
  j["schema"] = kResultsSchema;
  j["run_id"] = doc.run_id;
  j["manifest_hash"] = doc.manifest_hash;
  j["master_seed"] = doc.master_seed;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : doc.cells) j["cells"].push_back(to_json(c));
  j["findings"] = nlohmann::ordered_json::array();
  for (const auto& f : doc.findings)
    j["findings"].push_back({{"severity", f.severity == Severity::Error ? "error" : "warning"}, {"message", f.message}});
  return j.dump(2) + "\n";
}

inline ResultsDocument parse_results(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("schema", std::string{}) != kResultsSchema)
    throw Error(ErrorCode::MalformedRecord, "results document schema must be " + std::string(kResultsSchema));
  ResultsDocument doc;
  doc.run_id = j.at("run_id").get<std::string>();
  doc.manifest_hash = j.at("manifest_hash").get<std::string>();
  doc.master_seed = j.at("master_seed").get<std::uint64_t>();
  for (const auto& c : j.at("cells")) doc.cells.push_back(cell_from_json(c));
  for (const auto& f : j.at("findings"))
    doc.findings.push_back({f.at("severity").get<std::string>() == "error" ? Severity::Error : Severity::Warning,
                            f.at("message").get<std::string>()});
  return doc;
}

}  // namespace feet
