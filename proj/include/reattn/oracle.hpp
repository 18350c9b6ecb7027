#pragma once

// Brute-force reference scorer used to check the pipeline.
//
// Shares only data types with the main implementation. Every quantity is
// recomputed here with plain nested loops straight from the instance fields.
// Entropy uses log2 and IDF uses log10 so that any dependence on the
// logarithm base would surface as a mismatch.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "reattn/core.hpp"
#include "reattn/pipeline.hpp"

namespace reattn::oracle {

inline PipelineResult oracle_score(const RankingInstance& inst, const PipelineConfig& cfg) {
  const ValidationReport report = validate_instance(inst);
  if (!report.ok()) throw SchemaError("invalid instance: " + report.summary());

  const AttentionBlock& act = inst.attention_actual;
  const AttentionBlock& cal = inst.attention_calibration;
  const std::size_t L = act.layers;
  const std::size_t H = act.heads;
  const std::size_t C = act.columns;
  const std::size_t N = inst.documents.size();
  const Method method = cfg.method;
  const bool idf = method == Method::idf_only || method == Method::reattn;
  const bool entropy = method == Method::entropy_only || method == Method::reattn;

  // Head list.
  std::vector<std::pair<std::size_t, std::size_t>> heads;
  if (cfg.heads.selection == HeadSet::Selection::all) {
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t h = 0; h < H; ++h) heads.emplace_back(l, h);
  } else {
    if (cfg.heads.subset.empty()) throw ShapeError("empty head subset");
    for (std::size_t a = 0; a < cfg.heads.subset.size(); ++a) {
      const LayerHead& lh = cfg.heads.subset[a];
      if (lh.layer >= L || lh.head >= H) throw ShapeError("head out of range");
      for (std::size_t b = 0; b < a; ++b) {
        if (cfg.heads.subset[b].layer == lh.layer && cfg.heads.subset[b].head == lh.head)
          throw ShapeError("duplicate head");
      }
      heads.emplace_back(lh.layer, lh.head);
    }
  }

  PipelineResult result;
  result.method = method;
  result.source = act.mode == AttentionMode::per_head ? ScoreSource::attention_aggregation
                                                      : ScoreSource::precomputed;
  result.breakdowns.resize(N);

  std::size_t start = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const Document& doc = inst.documents[i];
    ScoreBreakdown& bd = result.breakdowns[i];
    bd.doc_id = doc.doc_id;
    const std::size_t n = doc.tokens.size();

    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t col = start + j;
      double a = 0.0;
      double c = 0.0;
      if (act.mode == AttentionMode::per_head) {
        for (std::size_t x = 0; x < heads.size(); ++x) {
          const std::size_t l = heads[x].first;
          const std::size_t h = heads[x].second;
          for (std::size_t k = 0; k < act.rows; ++k)
            a += act.values[((l * H + h) * act.rows + k) * C + col];
          for (std::size_t k = 0; k < cal.rows; ++k)
            c += cal.values[((l * H + h) * cal.rows + k) * C + col];
        }
        a = a / static_cast<double>(inst.query.size());
        c = c / static_cast<double>(inst.calibration_query.size());
      } else {
        a = act.values[col];
        c = cal.values[col];
      }
      bd.raw_actual.push_back(a);
      bd.raw_calibration.push_back(c);
      bd.calibrated.push_back(a - c);
    }

    // Filter: strictly above mean - 2 * population sd, else keep all.
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += bd.calibrated[j];
    const double mean = total / static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (bd.calibrated[j] - mean) * (bd.calibrated[j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j)
      if (bd.calibrated[j] > mean - 2.0 * sd) bd.filtered.push_back(j);
    if (bd.filtered.empty())
      for (std::size_t j = 0; j < n; ++j) bd.filtered.push_back(j);

    bd.icr_score = 0.0;
    for (std::size_t x = 0; x < bd.filtered.size(); ++x) bd.icr_score += bd.calibrated[bd.filtered[x]];

    // IDF re-weighting.
    bd.reweighted = bd.calibrated;
    if (idf) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::string& term = doc.tokens[j].normalized;
        if (term.empty()) continue;
        bool in_query = false;
        for (std::size_t q = 0; q < inst.query.size(); ++q)
          if (inst.query[q].normalized == term) in_query = true;
        if (!in_query) continue;
        std::size_t df = 0;
        for (std::size_t k = 0; k < N; ++k) {
          bool contains = false;
          for (std::size_t t = 0; t < inst.documents[k].tokens.size(); ++t)
            if (inst.documents[k].tokens[t].normalized == term) contains = true;
          if (contains) ++df;
        }
        const double w = std::log10((N + 1.0) / (df + 1.0)) / std::log10(N + 1.0);
        bd.reweighted[j] = w * bd.calibrated[j];
      }
    }

    bd.base = 0.0;
    for (std::size_t x = 0; x < bd.filtered.size(); ++x) bd.base += bd.reweighted[bd.filtered[x]];
    bd.adjusted = bd.base;
    bd.final_score = bd.base;
    start += n;
  }

  if (entropy) {
    for (std::size_t i = 0; i < N; ++i) {
      ScoreBreakdown& bd = result.breakdowns[i];
      const std::size_t m = bd.filtered.size();
      double positive = 0.0;
      for (std::size_t x = 0; x < m; ++x) {
        const double s = bd.reweighted[bd.filtered[x]];
        if (s > 0.0) positive += s;
      }
      bd.degenerate = !(positive > cfg.epsilon);
      for (std::size_t x = 0; x < m; ++x) {
        const double s = bd.reweighted[bd.filtered[x]];
        bd.distribution.push_back(bd.degenerate || s <= 0.0 ? 0.0 : s / positive);
      }
      double e = 0.0;
      if (!bd.degenerate && m > 1) {
        double h = 0.0;
        for (std::size_t x = 0; x < m; ++x) {
          const double p = bd.distribution[x];
          if (p > 0.0) h += -p * std::log2(p);
        }
        e = h / std::log2(static_cast<double>(m));
        if (e < 0.0) e = 0.0;
        if (e > 1.0) e = 1.0;
      }
      bd.entropy = e;
    }

    double num = 0.0;
    double den = 0.0;
    double plain = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const ScoreBreakdown& bd = result.breakdowns[i];
      if (bd.base > 0.0) {
        num += bd.base * bd.entropy;
        den += bd.base;
      }
      plain += bd.entropy;
    }
    const double e_bar = den > cfg.epsilon ? num / den : plain / static_cast<double>(N);

    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      ScoreBreakdown& bd = result.breakdowns[i];
      bd.mean_entropy = e_bar;
      bd.dispersion = bd.base > 0.0 ? 1.0 + (bd.entropy - e_bar) : 1.0;
      bd.adjusted = bd.base * bd.dispersion;
      sum += bd.adjusted;
    }
    result.normalized = sum > cfg.epsilon;
    for (std::size_t i = 0; i < N; ++i) {
      ScoreBreakdown& bd = result.breakdowns[i];
      bd.final_score = result.normalized ? bd.adjusted / sum : bd.adjusted;
    }
  }

  // Selection sort: highest score first, ties by smaller doc_id.
  std::vector<bool> taken(N, false);
  result.run.query_id = inst.query_id;
  for (std::size_t r = 0; r < N; ++r) {
    std::size_t best = N;
    for (std::size_t i = 0; i < N; ++i) {
      if (taken[i]) continue;
      if (best == N) {
        best = i;
        continue;
      }
      const ScoreBreakdown& a = result.breakdowns[i];
      const ScoreBreakdown& b = result.breakdowns[best];
      if (a.final_score > b.final_score ||
          (a.final_score == b.final_score && a.doc_id < b.doc_id))
        best = i;
    }
    taken[best] = true;
    result.run.entries.push_back(
        {result.breakdowns[best].doc_id, result.breakdowns[best].final_score, r + 1});
  }
  return result;
}

}  // namespace reattn::oracle
