#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reattn/aggregate.hpp"
#include "reattn/core.hpp"
#include "reattn/reweight.hpp"
#include "reattn/tokenmatch.hpp"

namespace reattn {

/// Scoring variants: the ICR baseline, each half of the re-weighting alone,
/// and the full method.
enum class Method { icr, idf_only, entropy_only, reattn };

inline constexpr Method kAllMethods[] = {Method::icr, Method::idf_only,
                                         Method::entropy_only, Method::reattn};

inline const char* to_string(Method method) {
  switch (method) {
    case Method::icr: return "icr";
    case Method::idf_only: return "idf-only";
    case Method::entropy_only: return "entropy-only";
    case Method::reattn: return "reattn";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

inline bool uses_idf(Method m) { return m == Method::idf_only || m == Method::reattn; }
inline bool uses_entropy(Method m) {
  return m == Method::entropy_only || m == Method::reattn;
}

struct PipelineConfig {
  Method method = Method::reattn;
  HeadSet heads = HeadSet::all();
  // Denominators at or below this are treated as zero (degenerate).
  double epsilon = 0.0;
};

/// Every intermediate for one document. Entropy fields keep their neutral
/// values (E = 0, W = 1, s' = B, s_final = B) for methods without the
/// entropy step.
struct ScoreBreakdown {
  std::string doc_id;
  std::vector<double> raw_actual;
  std::vector<double> raw_calibration;
  std::vector<double> calibrated;
  std::vector<std::size_t> filtered;
  std::vector<double> reweighted;
  double icr_score = 0.0;
  double base = 0.0;
  std::vector<double> distribution;
  bool degenerate = false;
  double entropy = 0.0;
  double mean_entropy = 0.0;
  double dispersion = 1.0;
  double adjusted = 0.0;
  double final_score = 0.0;
};

struct PipelineResult {
  Run run;
  std::vector<ScoreBreakdown> breakdowns;
  Method method = Method::reattn;
  ScoreSource source = ScoreSource::attention_aggregation;
  bool normalized = false;
};

/// Scores and ranks one instance. Throws SchemaError on an invalid instance.
inline PipelineResult reattn_pipeline(const RankingInstance& inst,
                                      const PipelineConfig& cfg) {
  if (const auto report = validate_instance(inst); !report.ok())
    throw SchemaError("invalid instance: " + report.summary());

  const auto table = build_token_score_table(inst, cfg.heads);
  const std::size_t n = inst.documents.size();

  PipelineResult result;
  result.method = cfg.method;
  result.source = table.source;
  result.breakdowns.resize(n);

  std::optional<MembershipMask> mask;
  IdfWeights weights;
  if (uses_idf(cfg.method)) {
    mask = query_membership(inst.documents, inst.query);
    weights = idf_weights(document_frequency(inst.documents, inst.query), n);
  }

  std::vector<double> base(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& bd = result.breakdowns[i];
    const auto& scores = table.documents[i];
    bd.doc_id = inst.documents[i].doc_id;
    bd.raw_actual = scores.raw_actual;
    bd.raw_calibration = scores.raw_calibration;
    bd.calibrated = scores.calibrated;
    bd.filtered = scores.filtered;
    bd.icr_score = icr_document_score(table, i);
    bd.reweighted = mask ? reweight_tokens(scores.calibrated, (*mask)[i],
                                           inst.documents[i].tokens, weights)
                         : scores.calibrated;
    bd.base = base_score(bd.reweighted, bd.filtered);
    bd.adjusted = bd.base;
    bd.final_score = bd.base;
    base[i] = bd.base;
  }

  if (uses_entropy(cfg.method)) {
    std::vector<double> entropy(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& bd = result.breakdowns[i];
      auto dist = token_distribution(bd.reweighted, bd.filtered, cfg.epsilon);
      bd.degenerate = dist.degenerate;
      bd.entropy = normalized_entropy(dist, bd.filtered.size());
      bd.distribution = std::move(dist.p);
      entropy[i] = bd.entropy;
    }
    const double mean = weighted_mean_entropy(base, entropy, cfg.epsilon);
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
      weight[i] = base[i] > 0.0 ? dispersion_weight(entropy[i], mean) : 1.0;
    }
    const auto fin = final_scores(base, weight, cfg.epsilon);
    result.normalized = fin.normalized;
    for (std::size_t i = 0; i < n; ++i) {
      auto& bd = result.breakdowns[i];
      bd.mean_entropy = mean;
      bd.dispersion = weight[i];
      bd.adjusted = fin.adjusted[i];
      bd.final_score = fin.final[i];
    }
  }

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(n);
  for (const auto& bd : result.breakdowns) scored.emplace_back(bd.doc_id, bd.final_score);
  result.run = make_run(inst.query_id, std::move(scored));
  return result;
}

/// Structured report behind `rank --explain`.
inline nlohmann::json explain_report(const PipelineResult& result) {
  nlohmann::json docs = nlohmann::json::array();
  double mean_entropy = 0.0;
  for (const auto& bd : result.breakdowns) {
    mean_entropy = bd.mean_entropy;
    docs.push_back({
        {"doc_id", bd.doc_id},
        {"raw_actual", bd.raw_actual},
        {"raw_calibration", bd.raw_calibration},
        {"calibrated", bd.calibrated},
        {"filtered", bd.filtered},
        {"s_tilde", bd.reweighted},
        {"icr_score", bd.icr_score},
        {"B", bd.base},
        {"p", bd.distribution},
        {"degenerate", bd.degenerate},
        {"E", bd.entropy},
        {"W", bd.dispersion},
        {"s_prime", bd.adjusted},
        {"s_final", bd.final_score},
    });
  }
  return {
      {"query_id", result.run.query_id},
      {"method", to_string(result.method)},
      {"provenance", to_string(result.source)},
      {"E_bar", mean_entropy},
      {"normalized", result.normalized},
      {"documents", std::move(docs)},
  };
}

}  // namespace reattn
