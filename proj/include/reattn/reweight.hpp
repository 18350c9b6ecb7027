#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "reattn/core.hpp"
#include "reattn/tokenmatch.hpp"

namespace reattn {

// ---------------------------------------------------------------------------
// Cross-document IDF weighting
// ---------------------------------------------------------------------------

/// log((N+1)/(df+1)) / log(N+1), in [0, 1].
inline double idf_weight(std::size_t df, std::size_t n_docs) {
  if (n_docs == 0) throw DomainError("idf_weight: n_docs must be >= 1");
  if (df > n_docs)
    throw DomainError("idf_weight: df " + std::to_string(df) + " exceeds n_docs " +
                      std::to_string(n_docs));
  const double n1 = static_cast<double>(n_docs) + 1.0;
  return std::log(n1 / (static_cast<double>(df) + 1.0)) / std::log(n1);
}

using IdfWeights = std::map<std::string, double>;

inline IdfWeights idf_weights(const DfTable& df, std::size_t n_docs) {
  IdfWeights weights;
  for (const auto& [term, count] : df) weights[term] = idf_weight(count, n_docs);
  return weights;
}

/// Scales query-matching tokens by their IDF weight; other tokens pass through.
inline std::vector<double> reweight_tokens(std::span<const double> calibrated,
                                           const std::vector<bool>& mask,
                                           const std::vector<Token>& tokens,
                                           const IdfWeights& weights) {
  if (calibrated.size() != mask.size() || calibrated.size() != tokens.size())
    throw LengthMismatch("reweight_tokens: scores, mask and tokens differ in length");
  std::vector<double> out(calibrated.begin(), calibrated.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (!mask[j]) continue;
    const auto it = weights.find(tokens[j].normalized);
    if (it == weights.end())
      throw MissingWeight("no IDF weight for masked token '" + tokens[j].normalized + "'");
    out[j] = it->second * calibrated[j];
  }
  return out;
}

/// Sum of token scores over the filtered set. Not clamped.
inline double base_score(std::span<const double> scores,
                         std::span<const std::size_t> filtered) {
  double sum = 0.0;
  for (std::size_t j : filtered) sum += scores[j];
  return sum;
}

// ---------------------------------------------------------------------------
// Entropy-based regularization
// ---------------------------------------------------------------------------

/// Distribution over the filtered set, aligned with the filtered indices.
struct TokenDistribution {
  std::vector<double> p;
  bool degenerate = false;  // no positive mass to normalize
};

inline TokenDistribution token_distribution(std::span<const double> scores,
                                            std::span<const std::size_t> filtered,
                                            double epsilon = 0.0) {
  TokenDistribution dist;
  double positive = 0.0;
  for (std::size_t j : filtered) positive += std::max(scores[j], 0.0);
  if (!(positive > epsilon)) {
    dist.degenerate = true;
    dist.p.assign(filtered.size(), 0.0);
    return dist;
  }
  dist.p.reserve(filtered.size());
  for (std::size_t j : filtered) dist.p.push_back(std::max(scores[j], 0.0) / positive);
  return dist;
}

/// Shannon entropy divided by log of the set size, in [0, 1]. Singletons and
/// degenerate distributions count as fully concentrated (0).
inline double normalized_entropy(const TokenDistribution& dist, std::size_t set_size) {
  if (dist.degenerate || set_size <= 1) return 0.0;
  double h = 0.0;
  for (double p : dist.p) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(h / std::log(static_cast<double>(set_size)), 0.0, 1.0);
}

/// Mean entropy weighted by max(B, 0); plain mean when no document has B > 0.
inline double weighted_mean_entropy(std::span<const double> base,
                                    std::span<const double> entropy,
                                    double epsilon = 0.0) {
  if (base.size() != entropy.size())
    throw LengthMismatch("weighted_mean_entropy: B and E differ in length");
  if (base.empty()) return 0.0;
  double weight_sum = 0.0;
  double weighted = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    const double w = std::max(base[k], 0.0);
    weight_sum += w;
    weighted += w * entropy[k];
  }
  if (weight_sum > epsilon) return weighted / weight_sum;
  return std::accumulate(entropy.begin(), entropy.end(), 0.0) /
         static_cast<double>(entropy.size());
}

inline double dispersion_weight(double entropy, double mean_entropy) {
  return 1.0 + (entropy - mean_entropy);
}

struct FinalScores {
  std::vector<double> adjusted;  // s'
  std::vector<double> final;     // s^final
  bool normalized = false;
};

/// s' = B * W for positive B (B otherwise), then rescaled to sum to one when
/// the total is positive.
inline FinalScores final_scores(std::span<const double> base,
                                std::span<const double> weight,
                                double epsilon = 0.0) {
  if (base.size() != weight.size())
    throw LengthMismatch("final_scores: B and W differ in length");
  FinalScores out;
  out.adjusted.resize(base.size());
  double total = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    out.adjusted[i] = base[i] > 0.0 ? base[i] * weight[i] : base[i];
    total += out.adjusted[i];
  }
  out.final = out.adjusted;
  if (total > epsilon) {
    out.normalized = true;
    for (double& s : out.final) s /= total;
  }
  return out;
}

}  // namespace reattn
