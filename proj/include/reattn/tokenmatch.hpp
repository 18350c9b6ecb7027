#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "reattn/core.hpp"
#include "reattn/normalize.hpp"

namespace reattn {

/// Builds tokens with their normalized forms and positions filled in.
inline std::vector<Token> make_tokens(const std::vector<std::string>& surfaces) {
  std::vector<Token> tokens;
  tokens.reserve(surfaces.size());
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    tokens.push_back({surfaces[i], normalize_token(surfaces[i]), i});
  }
  return tokens;
}

/// Non-empty normalized query forms.
inline std::set<std::string> query_vocabulary(const std::vector<Token>& query) {
  std::set<std::string> vocab;
  for (const auto& t : query) {
    if (!t.normalized.empty()) vocab.insert(t.normalized);
  }
  return vocab;
}

/// One flag per document token: true iff the token matches a query token.
using MembershipMask = std::vector<std::vector<bool>>;

inline MembershipMask query_membership(const std::vector<Document>& documents,
                                       const std::vector<Token>& query_tokens) {
  const auto vocab = query_vocabulary(query_tokens);
  MembershipMask mask;
  mask.reserve(documents.size());
  for (const auto& doc : documents) {
    std::vector<bool> flags(doc.tokens.size(), false);
    for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
      const auto& norm = doc.tokens[j].normalized;
      flags[j] = !norm.empty() && vocab.contains(norm);
    }
    mask.push_back(std::move(flags));
  }
  return mask;
}

/// Number of candidate documents containing each query token (not occurrences).
using DfTable = std::map<std::string, std::size_t>;

inline DfTable document_frequency(const std::vector<Document>& documents,
                                  const std::vector<Token>& query_tokens) {
  DfTable df;
  for (const auto& term : query_vocabulary(query_tokens)) df[term] = 0;
  for (const auto& doc : documents) {
    std::set<std::string> seen;
    for (const auto& t : doc.tokens) {
      if (df.contains(t.normalized)) seen.insert(t.normalized);
    }
    for (const auto& term : seen) ++df[term];
  }
  return df;
}

}  // namespace reattn
