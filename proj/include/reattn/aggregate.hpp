#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "reattn/core.hpp"

namespace reattn {

/// Sums the attention each document token receives from the query rows over
/// the selected heads, divided by the query length.
inline std::vector<double> aggregate_token_scores(const AttentionBlock& block,
                                                  std::size_t query_len,
                                                  const HeadSet& heads) {
  if (block.mode != AttentionMode::per_head)
    throw ModeError("aggregate_token_scores needs a per_head block");
  check_heads(heads, block.layers, block.heads);
  if (query_len == 0 || query_len != block.rows)
    throw ShapeError("query length " + std::to_string(query_len) +
                     " does not match block rows " + std::to_string(block.rows));

  std::vector<double> scores(block.columns, 0.0);
  for (const auto& [layer, head] : heads.expand(block.layers, block.heads)) {
    for (std::size_t k = 0; k < block.rows; ++k) {
      const auto row = block.row(layer, head, k);
      for (std::size_t j = 0; j < row.size(); ++j) scores[j] += row[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(query_len);
  for (double& s : scores) s *= inv;
  return scores;
}

inline std::vector<double> calibrate(std::span<const double> actual,
                                     std::span<const double> calibration) {
  if (actual.size() != calibration.size())
    throw LengthMismatch("calibrate: " + std::to_string(actual.size()) +
                         " actual scores vs " +
                         std::to_string(calibration.size()) + " calibration scores");
  std::vector<double> out(actual.size());
  for (std::size_t j = 0; j < actual.size(); ++j) out[j] = actual[j] - calibration[j];
  return out;
}

/// Indices whose score exceeds mean - 2 sigma (population sigma). Falls back
/// to every index when nothing survives the strict comparison.
inline std::vector<std::size_t> filter_tokens(std::span<const double> scores) {
  const std::size_t n = scores.size();
  if (n == 0) return {};
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double sq = 0.0;
  for (double s : scores) sq += (s - mean) * (s - mean);
  const double sigma = std::sqrt(sq / n);
  const double threshold = mean - 2.0 * sigma;

  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < n; ++j) {
    if (scores[j] > threshold) kept.push_back(j);
  }
  if (kept.empty()) {
    kept.resize(n);
    std::iota(kept.begin(), kept.end(), std::size_t{0});
  }
  return kept;
}

/// Where the per-token query scores came from.
enum class ScoreSource {
  attention_aggregation,  // computed from per-head attention
  precomputed,            // taken as given from an aggregated dump
};

inline const char* to_string(ScoreSource source) {
  return source == ScoreSource::attention_aggregation ? "attention_aggregation"
                                                      : "precomputed";
}

struct DocumentTokenScores {
  std::vector<double> raw_actual;
  std::vector<double> raw_calibration;
  std::vector<double> calibrated;
  std::vector<std::size_t> filtered;
};

struct TokenScoreTable {
  ScoreSource source = ScoreSource::attention_aggregation;
  std::vector<DocumentTokenScores> documents;
};

/// Aggregates (per_head) or reads (aggregated) token scores for both passes,
/// calibrates, splits by document and filters.
inline TokenScoreTable build_token_score_table(const RankingInstance& inst,
                                               const HeadSet& heads) {
  const auto& actual = inst.attention_actual;
  const auto& calib = inst.attention_calibration;

  TokenScoreTable table;
  std::vector<double> actual_scores;
  std::vector<double> calib_scores;
  if (actual.mode == AttentionMode::per_head) {
    table.source = ScoreSource::attention_aggregation;
    actual_scores = aggregate_token_scores(actual, inst.query.size(), heads);
    calib_scores =
        aggregate_token_scores(calib, inst.calibration_query.size(), heads);
  } else {
    table.source = ScoreSource::precomputed;
    actual_scores = actual.values;
    calib_scores = calib.values;
  }
  const auto calibrated = calibrate(actual_scores, calib_scores);

  const auto offsets = inst.column_offsets();
  table.documents.reserve(inst.documents.size());
  for (std::size_t i = 0; i < inst.documents.size(); ++i) {
    const auto first = static_cast<std::ptrdiff_t>(offsets[i]);
    const auto last = static_cast<std::ptrdiff_t>(offsets[i + 1]);
    DocumentTokenScores doc;
    doc.raw_actual.assign(actual_scores.begin() + first, actual_scores.begin() + last);
    doc.raw_calibration.assign(calib_scores.begin() + first, calib_scores.begin() + last);
    doc.calibrated.assign(calibrated.begin() + first, calibrated.begin() + last);
    doc.filtered = filter_tokens(doc.calibrated);
    table.documents.push_back(std::move(doc));
  }
  return table;
}

/// ICR document score: sum of calibrated scores over the filtered tokens.
inline double icr_document_score(const TokenScoreTable& table, std::size_t doc) {
  const auto& d = table.documents.at(doc);
  double sum = 0.0;
  for (std::size_t j : d.filtered) sum += d.calibrated[j];
  return sum;
}

}  // namespace reattn
