#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reattn/core.hpp"
#include "reattn/tokenmatch.hpp"

namespace reattn {

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

/// Writes to a sibling temp file and renames it over the target.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Dump format
// ---------------------------------------------------------------------------

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw SchemaError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline std::size_t require_count(const nlohmann::json& obj, const char* key,
                                 const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw SchemaError(where + ": '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

inline std::vector<Token> parse_tokens(const nlohmann::json& obj, const std::string& where) {
  const auto& arr = require(obj, "tokens", where);
  if (!arr.is_array()) throw SchemaError(where + ": 'tokens' must be an array");
  std::vector<std::string> surfaces;
  surfaces.reserve(arr.size());
  for (const auto& t : arr) {
    if (!t.is_string()) throw SchemaError(where + ": tokens must be strings");
    surfaces.push_back(t.get<std::string>());
  }
  return make_tokens(surfaces);
}

inline double parse_value(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": attention values must be numbers");
  return v.get<double>();
}

inline AttentionBlock parse_block(const nlohmann::json& payload, AttentionMode mode,
                                  std::size_t layers, std::size_t heads,
                                  std::size_t columns_hint, const std::string& where) {
  AttentionBlock block;
  block.mode = mode;
  block.layers = layers;
  block.heads = heads;
  if (!payload.is_array()) throw SchemaError(where + ": payload must be an array");

  if (mode == AttentionMode::aggregated) {
    block.columns = payload.size();
    block.values.reserve(payload.size());
    for (const auto& v : payload) block.values.push_back(parse_value(v, where));
    return block;
  }

  if (payload.size() != layers)
    throw SchemaError(where + ": expected " + std::to_string(layers) + " layers, found " +
                      std::to_string(payload.size()));
  bool shaped = false;
  for (const auto& layer : payload) {
    if (!layer.is_array() || layer.size() != heads)
      throw SchemaError(where + ": every layer must hold " + std::to_string(heads) +
                        " heads");
    for (const auto& head : layer) {
      if (!head.is_array()) throw SchemaError(where + ": head payload must be an array");
      for (const auto& row : head) {
        if (!row.is_array()) throw SchemaError(where + ": attention rows must be arrays");
      }
      if (!shaped) {
        block.rows = head.size();
        block.columns = head.empty() ? columns_hint : head.front().size();
        shaped = true;
        block.values.reserve(layers * heads * block.rows * block.columns);
      }
      if (head.size() != block.rows)
        throw SchemaError(where + ": heads disagree on query-token row count");
      for (const auto& row : head) {
        if (row.size() != block.columns)
          throw SchemaError(where + ": attention rows disagree on column count");
        for (const auto& v : row) block.values.push_back(parse_value(v, where));
      }
    }
  }
  if (!shaped) block.columns = columns_hint;
  return block;
}

inline nlohmann::json block_to_json(const AttentionBlock& block) {
  if (block.mode == AttentionMode::aggregated) return block.values;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < block.layers; ++l) {
    nlohmann::json heads = nlohmann::json::array();
    for (std::size_t h = 0; h < block.heads; ++h) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t r = 0; r < block.rows; ++r) {
        const auto row = block.row(l, h, r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
      }
      heads.push_back(std::move(rows));
    }
    layers.push_back(std::move(heads));
  }
  return layers;
}

inline nlohmann::json surfaces(const std::vector<Token>& tokens) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

}  // namespace detail

/// Decodes a dump without checking cross-field invariants.
inline RankingInstance parse_instance(const nlohmann::json& root) {
  if (!root.is_object()) throw SchemaError("dump: top level must be an object");
  const auto& version = detail::require(root, "schema_version", "dump");
  if (!version.is_number_integer()) throw SchemaError("dump: schema_version must be an integer");
  if (version.get<long long>() != kSchemaVersion)
    throw VersionError("unsupported schema_version " + version.dump());

  RankingInstance inst;
  const auto& query = detail::require(root, "query", "dump");
  inst.query = detail::parse_tokens(query, "query");
  if (const auto& text = detail::require(query, "text", "query"); text.is_string())
    inst.query_text = text.get<std::string>();
  else
    throw SchemaError("query: 'text' must be a string");
  if (query.contains("id")) {
    if (!query["id"].is_string()) throw SchemaError("query: 'id' must be a string");
    inst.query_id = query["id"].get<std::string>();
  }
  inst.calibration_query =
      detail::parse_tokens(detail::require(root, "calibration_query", "dump"),
                           "calibration_query");

  const auto& docs = detail::require(root, "documents", "dump");
  if (!docs.is_array()) throw SchemaError("dump: 'documents' must be an array");
  for (const auto& d : docs) {
    Document doc;
    const auto& id = detail::require(d, "id", "document");
    if (!id.is_string()) throw SchemaError("document: 'id' must be a string");
    doc.doc_id = id.get<std::string>();
    doc.tokens = detail::parse_tokens(d, "document " + doc.doc_id);
    if (d.contains("text")) {
      if (!d["text"].is_string()) throw SchemaError("document: 'text' must be a string");
      doc.text = d["text"].get<std::string>();
    }
    inst.documents.push_back(std::move(doc));
  }

  const auto& att = detail::require(root, "attention", "dump");
  const auto& mode_field = detail::require(att, "mode", "attention");
  AttentionMode mode;
  if (mode_field == "per_head") {
    mode = AttentionMode::per_head;
  } else if (mode_field == "aggregated") {
    mode = AttentionMode::aggregated;
  } else {
    throw SchemaError("attention: unknown mode " + mode_field.dump());
  }
  const std::size_t layers = detail::require_count(att, "layers", "attention");
  const std::size_t heads = detail::require_count(att, "heads", "attention");
  const std::size_t columns = inst.total_doc_tokens();
  inst.attention_actual = detail::parse_block(detail::require(att, "actual", "attention"),
                                              mode, layers, heads, columns, "actual");
  inst.attention_calibration =
      detail::parse_block(detail::require(att, "calibration", "attention"), mode, layers,
                          heads, columns, "calibration");

  if (root.contains("metadata")) inst.metadata = root["metadata"];
  return inst;
}

inline nlohmann::json instance_to_json(const RankingInstance& inst) {
  nlohmann::json query = {{"text", inst.query_text},
                          {"tokens", detail::surfaces(inst.query)}};
  if (!inst.query_id.empty()) query["id"] = inst.query_id;

  nlohmann::json docs = nlohmann::json::array();
  for (const auto& doc : inst.documents) {
    nlohmann::json d = {{"id", doc.doc_id}, {"tokens", detail::surfaces(doc.tokens)}};
    if (doc.text) d["text"] = *doc.text;
    docs.push_back(std::move(d));
  }
  return {
      {"schema_version", kSchemaVersion},
      {"query", std::move(query)},
      {"calibration_query", {{"tokens", detail::surfaces(inst.calibration_query)}}},
      {"documents", std::move(docs)},
      {"attention",
       {{"mode", to_string(inst.attention_actual.mode)},
        {"layers", inst.attention_actual.layers},
        {"heads", inst.attention_actual.heads},
        {"actual", detail::block_to_json(inst.attention_actual)},
        {"calibration", detail::block_to_json(inst.attention_calibration)}}},
      {"metadata", inst.metadata},
  };
}

/// Loads and validates a dump. A missing query id defaults to the file stem.
inline RankingInstance load_instance(const std::filesystem::path& path) {
  auto inst = parse_instance(parse_json(read_file(path), path.string()));
  if (inst.query_id.empty()) inst.query_id = path.stem().string();
  if (const auto report = validate_instance(inst); !report.ok())
    throw SchemaError(path.string() + ": " + report.summary());
  return inst;
}

inline void save_instance(const RankingInstance& inst, const std::filesystem::path& path) {
  write_file_atomic(path, instance_to_json(inst).dump() + "\n");
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

enum class RunFormat { trec, json };

inline std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

inline std::string trec_lines(const Run& run, const std::string& tag) {
  std::string out;
  for (const auto& e : run.entries) {
    out += run.query_id + " Q0 " + e.doc_id + " " + std::to_string(e.rank) + " " +
           format_score(e.score) + " " + tag + "\n";
  }
  return out;
}

inline nlohmann::json run_to_json(const Run& run) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : run.entries)
    entries.push_back({{"doc_id", e.doc_id}, {"score", e.score}, {"rank", e.rank}});
  return {{"query_id", run.query_id}, {"entries", std::move(entries)}};
}

inline Run run_from_json(const nlohmann::json& j) {
  Run run;
  const auto& qid = detail::require(j, "query_id", "run");
  if (!qid.is_string()) throw SchemaError("run: 'query_id' must be a string");
  run.query_id = qid.get<std::string>();
  const auto& entries = detail::require(j, "entries", "run");
  if (!entries.is_array()) throw SchemaError("run: 'entries' must be an array");
  for (const auto& e : entries) {
    const auto& doc = detail::require(e, "doc_id", "run entry");
    const auto& score = detail::require(e, "score", "run entry");
    if (!doc.is_string() || !score.is_number())
      throw SchemaError("run entry: bad doc_id or score");
    run.entries.push_back({doc.get<std::string>(), score.get<double>(),
                           detail::require_count(e, "rank", "run entry")});
  }
  return run;
}

/// One file for several queries: TREC lines concatenated, or a JSON array.
inline std::string format_runs(const std::vector<Run>& runs, RunFormat format,
                               const std::string& tag) {
  if (format == RunFormat::trec) {
    std::string out;
    for (const auto& run : runs) out += trec_lines(run, tag);
    return out;
  }
  if (runs.size() == 1) return run_to_json(runs.front()).dump(2) + "\n";
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& run : runs) arr.push_back(run_to_json(run));
  return arr.dump(2) + "\n";
}

inline void save_run(const Run& run, const std::filesystem::path& path, RunFormat format,
                     const std::string& tag = "reattn") {
  write_file_atomic(path, format_runs({run}, format, tag));
}

inline std::vector<Run> parse_trec_run(const std::string& text, const std::string& where) {
  std::map<std::string, Run> by_query;
  std::vector<std::string> order;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string qid, q0, doc, rank_text, score_text, tag, extra;
    if (!(fields >> qid >> q0 >> doc >> rank_text >> score_text >> tag) || (fields >> extra))
      throw ParseError(where + ":" + std::to_string(line_no) +
                       ": expected '<qid> Q0 <doc> <rank> <score> <tag>'");
    RunEntry entry;
    entry.doc_id = doc;
    try {
      std::size_t used = 0;
      const long long rank = std::stoll(rank_text, &used);
      if (used != rank_text.size() || rank < 1) throw std::invalid_argument("rank");
      entry.rank = static_cast<std::size_t>(rank);
      entry.score = std::stod(score_text, &used);
      if (used != score_text.size()) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw ParseError(where + ":" + std::to_string(line_no) + ": bad rank or score");
    }
    auto [it, inserted] = by_query.try_emplace(qid);
    if (inserted) {
      it->second.query_id = qid;
      order.push_back(qid);
    }
    it->second.entries.push_back(std::move(entry));
  }
  std::vector<Run> runs;
  for (const auto& qid : order) {
    auto run = std::move(by_query[qid]);
    std::stable_sort(run.entries.begin(), run.entries.end(),
                     [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
    runs.push_back(std::move(run));
  }
  return runs;
}

/// Reads a TREC or JSON run file (detected by its first character).
inline std::vector<Run> load_runs(const std::filesystem::path& path) {
  const auto text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
    const auto j = parse_json(text, path.string());
    std::vector<Run> runs;
    if (j.is_array()) {
      for (const auto& r : j) runs.push_back(run_from_json(r));
    } else {
      runs.push_back(run_from_json(j));
    }
    return runs;
  }
  return parse_trec_run(text, path.string());
}

inline Run load_run(const std::filesystem::path& path) {
  auto runs = load_runs(path);
  if (runs.size() != 1)
    throw SchemaError(path.string() + ": expected exactly one query, found " +
                      std::to_string(runs.size()));
  return std::move(runs.front());
}

// ---------------------------------------------------------------------------
// Head masks
// ---------------------------------------------------------------------------

/// A head mask is a JSON list of [layer, head] pairs (optionally wrapped as
/// {"heads": [...]}).
inline HeadSet parse_head_set(const nlohmann::json& j) {
  const auto& list = j.is_object() ? detail::require(j, "heads", "head mask") : j;
  if (!list.is_array()) throw SchemaError("head mask: expected a list of [layer, head] pairs");
  std::vector<LayerHead> heads;
  for (const auto& pair : list) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer() || pair[0].get<long long>() < 0 ||
        pair[1].get<long long>() < 0)
      throw SchemaError("head mask: entries must be [layer, head] pairs of non-negative integers");
    heads.push_back({pair[0].get<std::size_t>(), pair[1].get<std::size_t>()});
  }
  if (heads.empty()) throw SchemaError("head mask: empty");
  return HeadSet::of(std::move(heads));
}

inline HeadSet load_head_set(const std::filesystem::path& path) {
  return parse_head_set(parse_json(read_file(path), path.string()));
}

}  // namespace reattn
