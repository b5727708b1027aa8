#pragma once

// FEET and delta-FEET tables: assembly from cell results and rendering to
// Markdown, LaTeX, CSV and JSON. Rendering is a pure function of the table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "feet/error.hpp"
#include "feet/metrics.hpp"
#include "feet/results.hpp"

namespace feet {

enum class TableKind { Feet, Delta };
enum class ReportFormat { Markdown, Latex, Csv, Json };

inline ReportFormat parse_format(std::string_view s) {
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  if (s == "latex" || s == "tex") return ReportFormat::Latex;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw Error(ErrorCode::InvalidArgument, "unknown report format '" + std::string(s) + "'");
}

// Column identity: Frozen, k-shot, Fine-Tuned. Ordered in that sequence.
struct Column {
  Regime regime = Regime::Frozen;
  std::uint32_t shot = 0;

  auto operator<=>(const Column& o) const {
    auto rank = [](Regime r) { return r == Regime::Frozen ? 0 : r == Regime::FewShot ? 1 : 2; };
    if (auto c = rank(regime) <=> rank(o.regime); c != 0) return c;
    return shot <=> o.shot;
  }
  bool operator==(const Column&) const = default;

  std::string key() const {
    if (regime == Regime::FewShot) return "fewshot:" + std::to_string(shot);
    return std::string(to_string(regime));
  }
  std::string label() const {
    if (regime == Regime::Frozen) return "Frozen";
    if (regime == Regime::FineTuned) return "Fine-Tuned";
    return std::to_string(shot) + "-shot";
  }
  static Column from_key(std::string_view key) {
    if (key.starts_with("fewshot:")) return {Regime::FewShot, static_cast<std::uint32_t>(std::stoul(std::string(key.substr(8))))};
    return {parse_regime(key), 0};
  }
};

struct TableCell {
  std::optional<double> value;       // 0-100 scale, rounded to 2 decimals
  std::optional<double> half_width;  // FEET tables only
  bool bold = false;
  bool significant = false;  // delta tables only
  bool placeholder = false;  // frozen column of a delta table

  bool operator==(const TableCell&) const = default;
};

struct Table {
  TableKind kind = TableKind::Feet;
  std::string metric;  // metric id, e.g. "accuracy"
  std::string task;
  std::vector<Column> columns;
  std::vector<std::string> models;
  std::vector<std::vector<TableCell>> cells;  // [model][column]

  bool operator==(const Table&) const = default;
};

struct TableSet {
  std::vector<Table> feet;
  std::vector<Table> delta;
  std::vector<Finding> findings;
};

inline double round2(double v) {
  const double r = std::round(v * 100.0) / 100.0;
  return r == 0.0 ? 0.0 : r;  // no "-0.00"
}

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", round2(v));
  return buf;
}

// Bold every cell whose printed value equals the column maximum. Comparing
// rounded values means cells that print the same are bolded together.
inline void apply_bolding(Table& table) {
  if (table.kind != TableKind::Feet) return;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    std::optional<double> best;
    for (const auto& row : table.cells)
      if (row[c].value && (!best || *row[c].value > *best)) best = row[c].value;
    for (auto& row : table.cells) row[c].bold = best && row[c].value && *row[c].value == *best;
  }
}

// Assembles one FEET and one delta table per (metric, task). Models, tasks
// and metrics keep first-appearance order; columns are Frozen, the union of
// shot sizes ascending, then Fine-Tuned.
inline TableSet build_tables(const std::vector<CellResult>& results) {
  std::vector<std::string> tasks, metrics;
  std::map<std::string, std::vector<std::string>> models_by_task;
  std::map<std::string, std::vector<Column>> columns_by_task;
  auto push_unique = [](auto& vec, const auto& v) {
    if (std::find(vec.begin(), vec.end(), v) == vec.end()) vec.push_back(v);
  };
  for (const auto& r : results) {
    push_unique(tasks, r.task_id);
    push_unique(models_by_task[r.task_id], r.model_id);
    if (r.regime == Regime::FewShot && r.shot) push_unique(columns_by_task[r.task_id], Column{Regime::FewShot, *r.shot});
    for (const auto& m : r.metrics) push_unique(metrics, m.name);
  }

  TableSet out;
  for (const auto& task : tasks) {
    auto columns = columns_by_task[task];
    columns.push_back({Regime::Frozen, 0});
    columns.push_back({Regime::FineTuned, 0});
    std::sort(columns.begin(), columns.end());
    const auto& models = models_by_task[task];

    auto find_cell = [&](const std::string& model, const Column& col) -> const CellResult* {
      for (const auto& r : results)
        if (r.task_id == task && r.model_id == model && r.regime == col.regime &&
            (col.regime != Regime::FewShot || (r.shot && *r.shot == col.shot)))
          return &r;
      return nullptr;
    };

    std::vector<std::string> no_baseline;
    for (const auto& model : models) {
      const auto* frozen = find_cell(model, {Regime::Frozen, 0});
      if (!frozen || frozen->empty) {
        no_baseline.push_back(model);
        out.findings.push_back(error_finding("NoFrozenBaseline: " + model + "/" + task + " has no frozen cell; delta row skipped"));
      }
    }

    for (const auto& metric : metrics) {
      Table feet{TableKind::Feet, metric, task, columns, models, {}};
      Table delta{TableKind::Delta, metric, task, columns, {}, {}};
      for (const auto& model : models) {
        std::vector<TableCell> feet_row, delta_row;
        for (const auto& col : columns) {
          const auto* cell = find_cell(model, col);
          TableCell fc, dc;
          if (cell && !cell->empty) {
            if (const auto* est = cell->metric(metric); est && est->point) {
              fc.value = round2(100.0 * *est->point);
              fc.half_width = round2(100.0 * est->half_width);
            }
            if (const auto* d = cell->delta(metric); d && d->delta) {
              dc.value = round2(*d->delta);
              dc.significant = d->significant;
            }
          }
          dc.placeholder = col.regime == Regime::Frozen;
          feet_row.push_back(fc);
          delta_row.push_back(dc);
        }
        feet.cells.push_back(std::move(feet_row));
        if (std::find(no_baseline.begin(), no_baseline.end(), model) == no_baseline.end()) {
          delta.models.push_back(model);
          delta.cells.push_back(std::move(delta_row));
        }
      }
      apply_bolding(feet);
      out.feet.push_back(std::move(feet));
      out.delta.push_back(std::move(delta));
    }
  }
  return out;
}

namespace detail {

inline constexpr std::string_view kDash = "\u2014";
inline constexpr std::string_view kPlaceholder = "------";
inline constexpr std::string_view kDagger = "\u2020";

inline std::string metric_display(const std::string& id) {
  for (const auto& info : kMetricRegistry)
    if (info.id == id) return std::string(info.display);
  return id;
}

inline std::string latex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '_': case '%': case '&': case '#': case '$': case '{': case '}':
        out += '\\';
        out += c;
        break;
      case '\\': out += "\\textbackslash{}"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string cell_text(const TableCell& cell, TableKind kind) {
  if (kind == TableKind::Delta) {
    if (cell.placeholder) return std::string(kPlaceholder);
    if (!cell.value) return std::string(kDash);
    return fixed2(*cell.value) + "%" + (cell.significant ? std::string(kDagger) : "");
  }
  if (!cell.value) return std::string(kDash);
  return fixed2(*cell.value) + " (" + fixed2(cell.half_width.value_or(0.0)) + ")";
}

inline std::string render_markdown(const Table& t) {
  std::ostringstream os;
  os << "### " << (t.kind == TableKind::Delta ? "\u0394 " : "") << metric_display(t.metric) << " / " << t.task << "\n\n";
  os << "| Model |";
  for (const auto& c : t.columns) os << ' ' << c.label() << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << "---|";
  os << '\n';
  for (std::size_t r = 0; r < t.models.size(); ++r) {
    os << "| " << t.models[r] << " |";
    for (const auto& cell : t.cells[r]) {
      const std::string text = cell_text(cell, t.kind);
      os << ' ' << (cell.bold ? "**" + text + "**" : text) << " |";
    }
    os << '\n';
  }
  if (t.kind == TableKind::Delta) os << "\n" << kDagger << " significant at p < 0.05 (paired bootstrap)\n";
  return os.str();
}

inline std::string render_latex(const Table& t) {
  std::ostringstream os;
  os << "% " << (t.kind == TableKind::Delta ? "Delta " : "") << metric_display(t.metric) << " / " << t.task << '\n';
  os << "\\begin{tabular}{l" << std::string(t.columns.size(), 'c') << "}\n\\toprule\n\\textbf{Models}";
  for (const auto& c : t.columns) os << " & \\textbf{" << c.label() << '}';
  os << " \\\\\n\\midrule\n";
  for (std::size_t r = 0; r < t.models.size(); ++r) {
    os << latex_escape(t.models[r]);
    for (const auto& cell : t.cells[r]) {
      std::string text;
      if (t.kind == TableKind::Delta) {
        if (cell.placeholder) text = std::string(kPlaceholder);
        else if (!cell.value) text = "--";
        else text = fixed2(*cell.value) + "\\%" + (cell.significant ? "$^\\dagger$" : "");
      } else {
        text = cell.value ? fixed2(*cell.value) + " (" + fixed2(cell.half_width.value_or(0.0)) + ")" : "--";
        if (cell.bold) text = "\\textbf{" + text + "}";
      }
      os << " & " << text;
    }
    os << " \\\\\n";
  }
  os << "\\bottomrule\n\\end{tabular}\n";
  return os.str();
}

inline constexpr std::string_view kCsvHeader = "kind,metric,task,model,column,value,half_width,bold,significant";

inline void render_csv_rows(std::ostringstream& os, const Table& t) {
  const char* kind = t.kind == TableKind::Feet ? "feet" : "delta";
  for (std::size_t r = 0; r < t.models.size(); ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& cell = t.cells[r][c];
      os << kind << ',' << csv_field(t.metric) << ',' << csv_field(t.task) << ',' << csv_field(t.models[r]) << ','
         << t.columns[c].key() << ',' << (cell.value ? fixed2(*cell.value) : "") << ','
         << (cell.half_width ? fixed2(*cell.half_width) : "") << ',' << (cell.bold ? "true" : "false") << ','
         << (cell.significant ? "true" : "false") << '\n';
    }
  }
}

inline nlohmann::ordered_json table_json(const Table& t) {
  nlohmann::ordered_json j;
  j["kind"] = t.kind == TableKind::Feet ? "feet" : "delta";
  j["metric"] = t.metric;
  j["task"] = t.task;
  j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : t.columns) j["columns"].push_back(c.key());
  j["rows"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < t.models.size(); ++r) {
    nlohmann::ordered_json row;
    row["model"] = t.models[r];
    row["cells"] = nlohmann::ordered_json::array();
    for (const auto& cell : t.cells[r]) {
      nlohmann::ordered_json jc;
      jc["value"] = optional_number(cell.value);
      if (t.kind == TableKind::Feet) {
        jc["half_width"] = optional_number(cell.half_width);
        jc["bold"] = cell.bold;
      } else {
        jc["significant"] = cell.significant;
        jc["placeholder"] = cell.placeholder;
      }
      row["cells"].push_back(jc);
    }
    j["rows"].push_back(row);
  }
  return j;
}

}  // namespace detail

inline std::string render(const Table& table, ReportFormat format) {
  switch (format) {
    case ReportFormat::Markdown: return detail::render_markdown(table);
    case ReportFormat::Latex: return detail::render_latex(table);
    case ReportFormat::Csv: {
      std::ostringstream os;
      os << detail::kCsvHeader << '\n';
      detail::render_csv_rows(os, table);
      return os.str();
    }
    case ReportFormat::Json: return detail::table_json(table).dump(2) + "\n";
  }
  return {};
}

// Several tables in one document: Markdown/LaTeX blocks separated by a blank
// line, one CSV header, or a JSON array.
inline std::string render(const std::vector<Table>& tables, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::ostringstream os;
    os << detail::kCsvHeader << '\n';
    for (const auto& t : tables) detail::render_csv_rows(os, t);
    return os.str();
  }
  if (format == ReportFormat::Json) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& t : tables) arr.push_back(detail::table_json(t));
    return arr.dump(2) + "\n";
  }
  std::string out;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i) out += '\n';
    out += render(tables[i], format);
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace detail

// Parses the CSV rendering back into tables (values at printed precision).
// Bolding is recomputed by the same rule build_tables uses.
inline std::vector<Table> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != detail::kCsvHeader)
    throw Error(ErrorCode::MalformedRecord, "CSV header must be: " + std::string(detail::kCsvHeader));
  std::vector<Table> tables;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 9) throw Error(ErrorCode::MalformedRecord, "CSV line " + std::to_string(lineno) + ": expected 9 fields");
    const TableKind kind = f[0] == "feet" ? TableKind::Feet : TableKind::Delta;
    if (tables.empty() || tables.back().kind != kind || tables.back().metric != f[1] || tables.back().task != f[2])
      tables.push_back(Table{kind, f[1], f[2], {}, {}, {}});
    Table& t = tables.back();
    const Column col = Column::from_key(f[4]);
    auto col_it = std::find(t.columns.begin(), t.columns.end(), col);
    if (col_it == t.columns.end()) {
      t.columns.push_back(col);
      col_it = t.columns.end() - 1;
    }
    auto model_it = std::find(t.models.begin(), t.models.end(), f[3]);
    if (model_it == t.models.end()) {
      t.models.push_back(f[3]);
      t.cells.emplace_back();
      model_it = t.models.end() - 1;
    }
    auto& row = t.cells[static_cast<std::size_t>(model_it - t.models.begin())];
    const auto c = static_cast<std::size_t>(col_it - t.columns.begin());
    if (row.size() <= c) row.resize(c + 1);
    TableCell cell;
    if (!f[5].empty()) cell.value = std::stod(f[5]);
    if (!f[6].empty()) cell.half_width = std::stod(f[6]);
    cell.bold = f[7] == "true";
    cell.significant = f[8] == "true";
    cell.placeholder = kind == TableKind::Delta && col.regime == Regime::Frozen;
    row[c] = cell;
  }
  for (auto& t : tables) {
    for (auto& row : t.cells) row.resize(t.columns.size());
    apply_bolding(t);
  }
  return tables;
}

}  // namespace feet
