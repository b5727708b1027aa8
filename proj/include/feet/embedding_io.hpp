#pragma once

// On-disk embedding interchange: the canonical line-delimited JSON format
// (.feet.jsonl) and its binary twin (.feet.bin). See docs/formats.md.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "feet/error.hpp"

namespace feet {

enum class Regime { Frozen, FewShot, FineTuned };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Frozen: return "frozen";
    case Regime::FewShot: return "fewshot";
    case Regime::FineTuned: return "finetuned";
  }
  return "frozen";
}

inline Regime parse_regime(std::string_view s) {
  if (s == "frozen") return Regime::Frozen;
  if (s == "fewshot") return Regime::FewShot;
  if (s == "finetuned") return Regime::FineTuned;
  throw Error(ErrorCode::InvalidArgument, "unknown regime '" + std::string(s) + "'");
}

struct EmbeddingRecord {
  std::string id;
  std::uint32_t label = 0;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

struct EmbeddingSet {
  std::string model_id;
  std::string task_id;
  Regime regime = Regime::Frozen;
  std::optional<std::uint32_t> shot;
  std::uint32_t dim = 0;
  std::uint32_t num_classes = 2;
  // Free-form provider metadata (pooling, hub revision, ...). Always an object.
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<EmbeddingRecord> records;

  std::size_t size() const noexcept { return records.size(); }
};

inline constexpr std::string_view kCanonicalFormat = "FEET-EMB";
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::array<char, 8> kBinaryMagic = {'F', 'E', 'E', 'T', 'E', 'M', 'B', '1'};

namespace detail {

inline std::string header_line(const EmbeddingSet& set) {
  nlohmann::ordered_json h;
  h["format"] = kCanonicalFormat;
  h["version"] = kFormatVersion;
  h["model_id"] = set.model_id;
  h["task_id"] = set.task_id;
  h["regime"] = to_string(set.regime);
  if (set.shot) h["shot"] = *set.shot;
  h["dim"] = set.dim;
  h["num_classes"] = set.num_classes;
  if (!set.metadata.empty()) h["metadata"] = set.metadata;
  return h.dump();
}

inline void apply_header(EmbeddingSet& set, const nlohmann::json& h, std::size_t line) {
  auto fail = [line](const std::string& what) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": " + what);
  };
  if (!h.is_object()) fail("header is not an object");
  if (h.value("format", std::string{}) != kCanonicalFormat) fail("format must be \"FEET-EMB\"");
  if (!h.contains("version") || !h["version"].is_number_unsigned() || h["version"].get<std::uint32_t>() != kFormatVersion)
    fail("unsupported version");
  for (const char* key : {"model_id", "task_id", "regime"})
    if (!h.contains(key) || !h[key].is_string()) fail(std::string("missing string key '") + key + "'");
  for (const char* key : {"dim", "num_classes"})
    if (!h.contains(key) || !h[key].is_number_unsigned()) fail(std::string("missing integer key '") + key + "'");
  set.model_id = h["model_id"].get<std::string>();
  set.task_id = h["task_id"].get<std::string>();
  set.regime = parse_regime(h["regime"].get<std::string>());
  set.dim = h["dim"].get<std::uint32_t>();
  set.num_classes = h["num_classes"].get<std::uint32_t>();
  if (set.dim == 0) fail("dim must be positive");
  if (set.num_classes < 2) fail("num_classes must be >= 2");
  if (h.contains("shot")) {
    if (!h["shot"].is_number_unsigned() || h["shot"].get<std::uint32_t>() == 0) fail("shot must be a positive integer");
    if (set.regime != Regime::FewShot) fail("shot is only allowed for regime=fewshot");
    set.shot = h["shot"].get<std::uint32_t>();
  }
  set.metadata = nlohmann::json::object();
  if (h.contains("metadata")) {
    if (!h["metadata"].is_object()) fail("metadata must be an object");
    set.metadata = h["metadata"];
  }
  // Unknown top-level keys are folded into metadata.
  static const std::unordered_set<std::string> known = {"format", "version", "model_id", "task_id", "regime",
                                                         "shot", "dim", "num_classes", "metadata"};
  for (auto it = h.begin(); it != h.end(); ++it)
    if (!known.contains(it.key())) set.metadata[it.key()] = it.value();
}

// Record-level invariants shared by both readers. `seen` tracks ids.
inline void check_record(const EmbeddingSet& set, const EmbeddingRecord& rec, std::size_t line,
                         std::unordered_set<std::string>& seen) {
  const std::string where = "line " + std::to_string(line);
  if (rec.vector.size() != set.dim)
    throw Error(ErrorCode::DimMismatch, where + ": expected " + std::to_string(set.dim) + " coordinates, found " +
                                            std::to_string(rec.vector.size()));
  for (float v : rec.vector)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, where + ": non-finite coordinate");
  if (rec.label >= set.num_classes)
    throw Error(ErrorCode::MalformedRecord, where + ": label " + std::to_string(rec.label) +
                                                " >= num_classes " + std::to_string(set.num_classes));
  if (!seen.insert(rec.id).second) throw Error(ErrorCode::DuplicateId, where + ": duplicate id '" + rec.id + "'");
}

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw Error(ErrorCode::MalformedRecord, std::string("truncated binary file while reading ") + what);
  return value;
}

}  // namespace detail

// Canonical text reader. Whitespace inside a line is free; blank lines are not.
inline EmbeddingSet read_canonical(std::istream& in) {
  EmbeddingSet set;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedRecord, "line 1: missing header");
  ++lineno;
  try {
    detail::apply_header(set, nlohmann::json::parse(line), lineno);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, "line 1: " + std::string(e.what()));
  }

  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    const std::string where = "line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("label") ||
        !j["label"].is_number_unsigned() || !j.contains("vector") || !j["vector"].is_array())
      throw Error(ErrorCode::MalformedRecord, where + ": expected {\"id\": string, \"label\": int, \"vector\": [...]}");
    EmbeddingRecord rec;
    rec.id = j["id"].get<std::string>();
    rec.label = j["label"].get<std::uint32_t>();
    rec.vector.reserve(j["vector"].size());
    for (const auto& v : j["vector"]) {
      if (!v.is_number()) throw Error(ErrorCode::MalformedRecord, where + ": vector entries must be numbers");
      rec.vector.push_back(static_cast<float>(v.get<double>()));
    }
    detail::check_record(set, rec, lineno, seen);
    set.records.push_back(std::move(rec));
  }
  return set;
}

// Writes the canonical form: header keys in documented order, floats in
// shortest round-trip notation, '\n' line endings.
inline void write_canonical(std::ostream& out, const EmbeddingSet& set) {
  out << detail::header_line(set) << '\n';
  std::array<char, 64> buf{};
  for (const auto& rec : set.records) {
    out << R"({"id":)" << nlohmann::json(rec.id).dump() << R"(,"label":)" << rec.label << R"(,"vector":[)";
    for (std::size_t i = 0; i < rec.vector.size(); ++i) {
      if (i) out << ',';
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), rec.vector[i]);
      out.write(buf.data(), end - buf.data());
    }
    out << "]}\n";
  }
}

inline EmbeddingSet read_binary(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kBinaryMagic)
    throw Error(ErrorCode::MalformedRecord, "bad magic, expected FEETEMB1");
  const auto version = detail::get_le<std::uint32_t>(in, "version");
  if (version != kFormatVersion) throw Error(ErrorCode::MalformedRecord, "unsupported version " + std::to_string(version));
  const auto dim = detail::get_le<std::uint32_t>(in, "dim");
  const auto num_classes = detail::get_le<std::uint32_t>(in, "num_classes");
  const auto count = detail::get_le<std::uint64_t>(in, "count");
  const auto header_len = detail::get_le<std::uint32_t>(in, "header length");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), header_len)) throw Error(ErrorCode::MalformedRecord, "truncated header blob");

  EmbeddingSet set;
  try {
    detail::apply_header(set, nlohmann::json::parse(header), 0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("header blob: ") + e.what());
  }
  if (set.dim != dim || set.num_classes != num_classes)
    throw Error(ErrorCode::MalformedRecord, "fixed header disagrees with JSON header blob");

  std::unordered_set<std::string> seen;
  set.records.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    const auto id_len = detail::get_le<std::uint32_t>(in, "id length");
    rec.id.resize(id_len);
    if (!in.read(rec.id.data(), id_len)) throw Error(ErrorCode::MalformedRecord, "truncated id");
    rec.label = detail::get_le<std::uint32_t>(in, "label");
    rec.vector.resize(dim);
    if (!in.read(reinterpret_cast<char*>(rec.vector.data()), static_cast<std::streamsize>(dim * sizeof(float))))
      throw Error(ErrorCode::MalformedRecord, "truncated vector in record " + std::to_string(i));
    // Binary records are numbered from 1 in error messages, like text lines.
    detail::check_record(set, rec, static_cast<std::size_t>(i + 1), seen);
    set.records.push_back(std::move(rec));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::MalformedRecord, "trailing bytes after last record");
  return set;
}

inline void write_binary(std::ostream& out, const EmbeddingSet& set) {
  out.write(kBinaryMagic.data(), kBinaryMagic.size());
  detail::put_le<std::uint32_t>(out, kFormatVersion);
  detail::put_le<std::uint32_t>(out, set.dim);
  detail::put_le<std::uint32_t>(out, set.num_classes);
  detail::put_le<std::uint64_t>(out, set.records.size());
  const std::string header = detail::header_line(set);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& rec : set.records) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.id.size()));
    out.write(rec.id.data(), static_cast<std::streamsize>(rec.id.size()));
    detail::put_le<std::uint32_t>(out, rec.label);
    out.write(reinterpret_cast<const char*>(rec.vector.data()),
              static_cast<std::streamsize>(rec.vector.size() * sizeof(float)));
  }
}

// Dispatches on the leading magic bytes, not the extension.
inline EmbeddingSet load_embedding_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  const bool binary = in.gcount() == 8 && magic == kBinaryMagic;
  in.clear();
  in.seekg(0);
  try {
    return binary ? read_binary(in) : read_canonical(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + std::string(e.what()).substr(to_string(e.code()).size() + 2));
  }
}

inline void save_embedding_set(const std::filesystem::path& path, const EmbeddingSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const std::string name = path.filename().string();
  if (name.ends_with(".bin"))
    write_binary(out, set);
  else
    write_canonical(out, set);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

// Warns about declared classes with no records. Not an error: test splits of
// rare classes can legitimately be empty.
inline std::vector<Finding> class_coverage(const EmbeddingSet& set) {
  std::vector<std::size_t> counts(set.num_classes, 0);
  for (const auto& r : set.records) ++counts[r.label];
  std::vector<Finding> findings;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      findings.push_back(warning(set.model_id + "/" + set.task_id + "/" + std::string(to_string(set.regime)) +
                                 ": class " + std::to_string(c) + " has no records"));
  return findings;
}

}  // namespace feet
