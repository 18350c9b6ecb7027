#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reattn/normalize.hpp"

namespace reattn {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };
class VersionError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class ModeError : public Error { public: using Error::Error; };
class LengthMismatch : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class MissingWeight : public Error { public: using Error::Error; };
class ParamError : public Error { public: using Error::Error; };
class KeyError : public Error { public: using Error::Error; };

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Token {
  std::string surface;
  std::string normalized;
  std::size_t index = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Document {
  std::string doc_id;
  std::vector<Token> tokens;
  std::optional<std::string> text;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class AttentionMode { per_head, aggregated };

inline const char* to_string(AttentionMode mode) {
  return mode == AttentionMode::per_head ? "per_head" : "aggregated";
}

/// Attention from query-token rows to document-token columns.
///
/// In per_head mode `values` is row-major [layer][head][row][column]; in
/// aggregated mode it holds one pre-aggregated score per column and `rows`
/// is unused.
struct AttentionBlock {
  AttentionMode mode = AttentionMode::per_head;
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t rows = 0;
  std::size_t columns = 0;
  std::vector<double> values;

  std::size_t expected_size() const {
    return mode == AttentionMode::per_head ? layers * heads * rows * columns
                                           : columns;
  }

  std::span<const double> row(std::size_t layer, std::size_t head,
                              std::size_t r) const {
    const std::size_t offset = ((layer * heads + head) * rows + r) * columns;
    return std::span<const double>(values).subspan(offset, columns);
  }

  double at(std::size_t layer, std::size_t head, std::size_t r,
            std::size_t column) const {
    return values[((layer * heads + head) * rows + r) * columns + column];
  }

  friend bool operator==(const AttentionBlock&, const AttentionBlock&) = default;
};

struct RankingInstance {
  std::string query_id;
  std::string query_text;
  std::vector<Token> query;
  std::vector<Token> calibration_query;
  std::vector<Document> documents;
  AttentionBlock attention_actual;
  AttentionBlock attention_calibration;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t total_doc_tokens() const {
    std::size_t total = 0;
    for (const auto& doc : documents) total += doc.tokens.size();
    return total;
  }

  /// First global column of each document, plus a trailing end offset.
  std::vector<std::size_t> column_offsets() const {
    std::vector<std::size_t> offsets;
    offsets.reserve(documents.size() + 1);
    std::size_t at = 0;
    for (const auto& doc : documents) {
      offsets.push_back(at);
      at += doc.tokens.size();
    }
    offsets.push_back(at);
    return offsets;
  }

  friend bool operator==(const RankingInstance&, const RankingInstance&) = default;
};

struct LayerHead {
  std::size_t layer = 0;
  std::size_t head = 0;

  friend auto operator<=>(const LayerHead&, const LayerHead&) = default;
};

struct HeadSet {
  enum class Selection { all, subset };

  Selection selection = Selection::all;
  std::vector<LayerHead> subset;

  static HeadSet all() { return {}; }
  static HeadSet of(std::vector<LayerHead> heads) {
    return {Selection::subset, std::move(heads)};
  }

  bool is_all() const { return selection == Selection::all; }

  /// Concrete (layer, head) list for a model shape.
  std::vector<LayerHead> expand(std::size_t layers, std::size_t heads) const {
    if (!is_all()) return subset;
    std::vector<LayerHead> out;
    out.reserve(layers * heads);
    for (std::size_t l = 0; l < layers; ++l)
      for (std::size_t h = 0; h < heads; ++h) out.push_back({l, h});
    return out;
  }
};

/// Throws ShapeError when the set does not fit an L x H model.
inline void check_heads(const HeadSet& heads, std::size_t layers,
                        std::size_t num_heads) {
  if (heads.is_all()) return;
  if (heads.subset.empty()) throw ShapeError("head subset is empty");
  std::set<LayerHead> seen;
  for (const auto& lh : heads.subset) {
    if (lh.layer >= layers || lh.head >= num_heads) {
      throw ShapeError("head (" + std::to_string(lh.layer) + ", " +
                       std::to_string(lh.head) + ") outside model shape " +
                       std::to_string(layers) + "x" + std::to_string(num_heads));
    }
    if (!seen.insert(lh).second) {
      throw ShapeError("duplicate head (" + std::to_string(lh.layer) + ", " +
                       std::to_string(lh.head) + ")");
    }
  }
}

struct RunEntry {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;

  friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

struct Run {
  std::string query_id;
  std::vector<RunEntry> entries;

  friend bool operator==(const Run&, const Run&) = default;
};

/// Orders by score descending, then doc_id ascending, and assigns 1-based ranks.
inline Run make_run(std::string query_id,
                    std::vector<std::pair<std::string, double>> scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Run run{std::move(query_id), {}};
  run.entries.reserve(scored.size());
  std::size_t rank = 1;
  for (auto& [doc_id, score] : scored) {
    run.entries.push_back({std::move(doc_id), score, rank++});
  }
  return run;
}

/// Empty string when the run satisfies its ordering invariants.
inline std::string run_violation(const Run& run) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < run.entries.size(); ++i) {
    const auto& e = run.entries[i];
    if (e.rank != i + 1) return "ranks are not consecutive from 1";
    if (!ids.insert(e.doc_id).second) return "duplicate doc_id " + e.doc_id;
    if (i > 0) {
      const auto& prev = run.entries[i - 1];
      if (prev.score < e.score ||
          (prev.score == e.score && !(prev.doc_id < e.doc_id))) {
        return "entries not ordered by (score desc, doc_id asc) at rank " +
               std::to_string(e.rank);
      }
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class ViolationKind {
  no_documents,
  duplicate_doc_id,
  empty_document,
  empty_token_surface,
  normalization_mismatch,
  empty_query,
  block_mismatch,
  shape_mismatch,
  attention_non_finite,
  attention_out_of_range,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(),
                      [kind](const Violation& v) { return v.kind == kind; }));
  }
  std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.message;
    }
    return out;
  }
};

namespace detail {

inline void check_tokens(const std::vector<Token>& tokens,
                         const std::string& where, ValidationReport& report) {
  for (const auto& t : tokens) {
    if (t.surface.empty()) {
      report.violations.push_back({ViolationKind::empty_token_surface,
                                   where + ": token " + std::to_string(t.index) +
                                       " has an empty surface"});
    } else if (t.normalized != normalize_token(t.surface)) {
      report.violations.push_back(
          {ViolationKind::normalization_mismatch,
           where + ": token " + std::to_string(t.index) +
               " normalized form does not match its surface"});
    }
  }
}

inline void check_block_values(const AttentionBlock& block,
                               const std::string& name,
                               ValidationReport& report) {
  bool non_finite = false;
  bool out_of_range = false;
  for (double v : block.values) {
    if (!std::isfinite(v)) {
      non_finite = true;
    } else if (v < 0.0 ||
               (block.mode == AttentionMode::per_head && v > 1.0)) {
      out_of_range = true;
    }
  }
  if (non_finite) {
    report.violations.push_back({ViolationKind::attention_non_finite,
                                 name + ": attention contains non-finite values"});
  }
  if (out_of_range) {
    report.violations.push_back(
        {ViolationKind::attention_out_of_range,
         block.mode == AttentionMode::per_head
             ? name + ": attention out of [0,1]"
             : name + ": aggregated attention is negative"});
  }
}

}  // namespace detail

/// Lists every broken invariant of the instance. Never throws.
inline ValidationReport validate_instance(const RankingInstance& inst) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::string msg) {
    report.violations.push_back({kind, std::move(msg)});
  };

  if (inst.documents.empty()) add(ViolationKind::no_documents, "no documents");

  std::set<std::string> ids;
  for (const auto& doc : inst.documents) {
    if (!ids.insert(doc.doc_id).second)
      add(ViolationKind::duplicate_doc_id, "duplicate doc_id " + doc.doc_id);
    if (doc.tokens.empty())
      add(ViolationKind::empty_document, "document " + doc.doc_id + " has no tokens");
    detail::check_tokens(doc.tokens, "document " + doc.doc_id, report);
  }
  detail::check_tokens(inst.query, "query", report);
  detail::check_tokens(inst.calibration_query, "calibration query", report);

  const auto& actual = inst.attention_actual;
  const auto& calib = inst.attention_calibration;
  const std::size_t columns = inst.total_doc_tokens();

  if (actual.mode != calib.mode)
    add(ViolationKind::block_mismatch, "actual and calibration blocks differ in mode");
  if (actual.layers != calib.layers || actual.heads != calib.heads)
    add(ViolationKind::block_mismatch,
        "actual and calibration blocks differ in layer/head count");
  if (actual.layers == 0 || actual.heads == 0 || calib.layers == 0 || calib.heads == 0)
    add(ViolationKind::shape_mismatch, "layer and head counts must be >= 1");

  for (const auto* block : {&actual, &calib}) {
    const std::string name = block == &actual ? "actual" : "calibration";
    if (block->columns != columns)
      add(ViolationKind::shape_mismatch,
          name + ": column count " + std::to_string(block->columns) +
              " != total document tokens " + std::to_string(columns));
    if (block->values.size() != block->expected_size())
      add(ViolationKind::shape_mismatch, name + ": payload size does not match its shape");
    detail::check_block_values(*block, name, report);
  }

  if (actual.mode == AttentionMode::per_head) {
    if (inst.query.empty()) add(ViolationKind::empty_query, "query has no tokens");
    if (inst.calibration_query.empty())
      add(ViolationKind::empty_query, "calibration query has no tokens");
    if (actual.rows != inst.query.size())
      add(ViolationKind::shape_mismatch,
          "actual: row count " + std::to_string(actual.rows) +
              " != query tokens " + std::to_string(inst.query.size()));
  }
  if (calib.mode == AttentionMode::per_head &&
      calib.rows != inst.calibration_query.size())
    add(ViolationKind::shape_mismatch,
        "calibration: row count " + std::to_string(calib.rows) +
            " != calibration query tokens " +
            std::to_string(inst.calibration_query.size()));

  return report;
}

}  // namespace reattn
