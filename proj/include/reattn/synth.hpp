#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "reattn/core.hpp"
#include "reattn/eval.hpp"
#include "reattn/tokenmatch.hpp"

namespace reattn {

/// Portable seeded random source.
///
/// Raw 64-bit draws come from std::mt19937_64, whose output sequence is fixed
/// by the C++ standard. Doubles take the top 53 bits of one draw times 2^-53;
/// integer picks scale a double draw and truncate. No std distribution is
/// used because their algorithms vary between standard libraries.
class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

  /// Integer in [0, n).
  std::size_t below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }
  /// Integer in [lo, hi].
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

struct SynthParams {
  std::uint64_t seed = 0;
  std::size_t n_docs = 8;
  std::size_t min_tokens = 10;
  std::size_t max_tokens = 30;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t query_len = 4;
  // Probability that a document token copies a query word.
  double overlap_rate = 0.1;
  // Share of a document's relevance signal placed on a single peak token.
  double concentration = 0.0;
  std::size_t relevant_doc_count = 1;
  // Distractors copy query words at `stuffing_rate` instead of `overlap_rate`.
  std::size_t distractor_count = 0;
  double stuffing_rate = 0.5;
  // Extra query-dependent attention on tokens that lexically match the query.
  double lexical_boost = 0.0;
  // Signal multiplier of relevant documents.
  double relevance_boost = 3.0;
  // Per-entry uniform noise amplitude, relative to the mean per-token mass.
  double noise = 0.02;
  // Relevant documents ignore `concentration` and spread their signal.
  bool broad_relevant = false;
  // Every query word occurs in every document (df = N).
  bool saturate_query_terms = false;
  AttentionMode mode = AttentionMode::per_head;
};

inline void check_params(const SynthParams& p) {
  auto fail = [](const std::string& msg) { throw ParamError(msg); };
  auto unit = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " must be in [0, 1]");
  };
  if (p.n_docs < 1) fail("docs must be >= 1");
  if (p.min_tokens < 1) fail("min-tokens must be >= 1");
  if (p.max_tokens < p.min_tokens) fail("max-tokens must be >= min-tokens");
  if (p.n_layers < 1 || p.n_heads < 1) fail("layers and heads must be >= 1");
  if (p.query_len < 1) fail("query-len must be >= 1");
  if (p.relevant_doc_count < 1) fail("relevant must be >= 1");
  if (p.relevant_doc_count + p.distractor_count > p.n_docs)
    fail("relevant + distractors exceeds docs");
  unit(p.overlap_rate, "overlap-rate");
  unit(p.concentration, "concentration");
  unit(p.stuffing_rate, "stuffing-rate");
  if (!(p.lexical_boost >= 0.0)) fail("lexical-boost must be >= 0");
  if (!(p.relevance_boost > 0.0)) fail("relevance-boost must be > 0");
  if (!(p.noise >= 0.0 && p.noise <= 0.2)) fail("noise must be in [0, 0.2]");
}

struct SynthInstance {
  RankingInstance instance;
  Qrels qrels;
  std::vector<std::string> relevant;
  std::vector<std::string> distractors;
};

namespace detail {

inline std::string query_word(std::size_t k) {
  static const char* const kWords[] = {"kieslowski", "producer", "devils",  "doorstep",
                                       "premiere",   "festival", "cannes",  "screenplay",
                                       "nominated",  "jiang",    "wen",     "trilogy"};
  constexpr std::size_t n = sizeof(kWords) / sizeof(kWords[0]);
  return k < n ? kWords[k] : "term" + std::to_string(k);
}

inline std::string capitalized(std::string word) {
  if (!word.empty()) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  return word;
}

}  // namespace detail

/// Builds a seeded ranking instance plus its relevance judgments.
///
/// Every document carries a query-dependent relevance signal (stronger for
/// relevant ones) on top of a query-independent bias profile shared by the
/// actual and calibration passes; punctuation receives three times the bias.
/// Per head, the signal is scaled by a random head gain and each query row
/// by a small jitter; all values are finally rescaled so that no attention
/// row sums above 0.9.
inline SynthInstance generate_instance(const SynthParams& p) {
  check_params(p);
  Random rng(p.seed);

  SynthInstance out;
  auto& inst = out.instance;
  inst.query_id = "q" + std::to_string(p.seed);

  // Query: words then a trailing question mark for queries of 3+ tokens.
  const bool question_mark = p.query_len >= 3;
  const std::size_t n_words = p.query_len - (question_mark ? 1 : 0);
  std::vector<std::string> words;
  std::vector<std::string> query_surfaces;
  for (std::size_t k = 0; k < n_words; ++k) {
    words.push_back(detail::query_word(k));
    query_surfaces.push_back(k == 0 ? detail::capitalized(words[k]) : "\xC4\xA0" + words[k]);
    inst.query_text += (k ? " " : "") + words[k];
  }
  if (question_mark) {
    query_surfaces.push_back("?");
    inst.query_text += "?";
  }
  inst.query = make_tokens(query_surfaces);
  inst.calibration_query = make_tokens({"N", "/", "A"});
  inst.metadata = {{"generator", "reattn-synth"}, {"seed", p.seed}};

  // Roles.
  std::vector<std::size_t> order(p.n_docs);
  for (std::size_t i = 0; i < p.n_docs; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> role(p.n_docs, 0);  // 0 other, 1 relevant, 2 distractor
  for (std::size_t r = 0; r < p.relevant_doc_count; ++r) role[order[r]] = 1;
  for (std::size_t r = 0; r < p.distractor_count; ++r)
    role[order[p.relevant_doc_count + r]] = 2;

  const double mean_len = 0.5 * static_cast<double>(p.min_tokens + p.max_tokens);
  const double unit = 1.0 / mean_len;

  std::vector<double> signal;   // relevance + lexical, per global column
  std::vector<double> bias;     // query-independent, per global column
  static const char* const kPunct[] = {",", ".", ";"};

  for (std::size_t i = 0; i < p.n_docs; ++i) {
    Document doc;
    char id[32];
    std::snprintf(id, sizeof id, "d%02zu", i + 1);
    doc.doc_id = id;

    const std::size_t len = rng.between(p.min_tokens, p.max_tokens);
    const double copy_rate = role[i] == 2 ? p.stuffing_rate : p.overlap_rate;
    std::vector<std::string> surfaces(len);
    std::vector<bool> is_query(len, false);
    std::vector<bool> is_punct(len, false);
    for (std::size_t j = 0; j < len; ++j) {
      if (n_words > 0 && rng.bernoulli(copy_rate)) {
        const auto& w = words[rng.below(n_words)];
        surfaces[j] = "\xC4\xA0" + (rng.bernoulli(0.5) ? w : detail::capitalized(w));
        is_query[j] = true;
      } else if (rng.bernoulli(0.15)) {
        surfaces[j] = kPunct[rng.below(3)];
        is_punct[j] = true;
      } else {
        surfaces[j] = "\xC4\xA0w" + std::to_string(rng.below(400));
      }
    }
    if (p.saturate_query_terms && n_words > 0) {
      std::vector<std::size_t> slots(len);
      for (std::size_t j = 0; j < len; ++j) slots[j] = j;
      rng.shuffle(slots);
      for (std::size_t k = 0; k < std::min(n_words, len); ++k) {
        const std::size_t j = slots[k];
        surfaces[j] = "\xC4\xA0" + words[k];
        is_query[j] = true;
        is_punct[j] = false;
      }
    }
    doc.tokens = make_tokens(surfaces);

    // Relevance signal: a spread part plus a peak on one non-query token.
    const double strength = rng.uniform(0.5, 1.5) * (role[i] == 1 ? p.relevance_boost : 1.0);
    const double focus = (role[i] == 1 && p.broad_relevant) ? 0.0 : p.concentration;
    std::vector<std::size_t> peak_candidates;
    for (std::size_t j = 0; j < len; ++j)
      if (!is_query[j] && !is_punct[j]) peak_candidates.push_back(j);
    const std::size_t peak = peak_candidates.empty()
                                 ? rng.below(len)
                                 : peak_candidates[rng.below(peak_candidates.size())];
    std::vector<double> spread(len);
    double spread_sum = 0.0;
    for (auto& u : spread) spread_sum += (u = rng.uniform(0.5, 1.5));
    for (std::size_t j = 0; j < len; ++j) {
      double s = strength * (1.0 - focus) * spread[j] / spread_sum;
      if (j == peak) s += strength * focus;
      if (is_query[j]) s += p.lexical_boost * unit;
      signal.push_back(s);
      bias.push_back((is_punct[j] ? 3.0 : 1.0) * rng.uniform(0.5, 1.5) * unit);
    }
    out.qrels.judgments[inst.query_id][doc.doc_id] = role[i] == 1 ? 1 : 0;
    if (role[i] == 1) out.relevant.push_back(doc.doc_id);
    if (role[i] == 2) out.distractors.push_back(doc.doc_id);
    inst.documents.push_back(std::move(doc));
  }

  const std::size_t columns = signal.size();
  const std::size_t q_rows = inst.query.size();
  const std::size_t c_rows = inst.calibration_query.size();
  AttentionBlock actual{AttentionMode::per_head, p.n_layers, p.n_heads, q_rows, columns, {}};
  AttentionBlock calib{AttentionMode::per_head, p.n_layers, p.n_heads, c_rows, columns, {}};
  actual.values.reserve(actual.expected_size());
  calib.values.reserve(calib.expected_size());

  double max_row = 0.0;
  for (std::size_t l = 0; l < p.n_layers; ++l) {
    for (std::size_t h = 0; h < p.n_heads; ++h) {
      const double gain = rng.uniform(0.2, 1.0);
      const double bias_scale = rng.uniform(0.5, 1.5);
      for (std::size_t k = 0; k < q_rows; ++k) {
        const double jitter = rng.uniform(0.8, 1.2);
        double row = 0.0;
        for (std::size_t c = 0; c < columns; ++c) {
          const double v = gain * jitter * signal[c] + bias_scale * bias[c] +
                           p.noise * rng.uniform(-1.0, 1.0) * unit;
          actual.values.push_back(std::max(v, 0.0));
          row += actual.values.back();
        }
        max_row = std::max(max_row, row);
      }
      for (std::size_t k = 0; k < c_rows; ++k) {
        double row = 0.0;
        for (std::size_t c = 0; c < columns; ++c) {
          const double v = bias_scale * bias[c] + p.noise * rng.uniform(-1.0, 1.0) * unit;
          calib.values.push_back(std::max(v, 0.0));
          row += calib.values.back();
        }
        max_row = std::max(max_row, row);
      }
    }
  }
  const double scale = max_row > 0.0 ? 0.9 / max_row : 1.0;
  for (double& v : actual.values) v *= scale;
  for (double& v : calib.values) v *= scale;

  if (p.mode == AttentionMode::aggregated) {
    auto collapse = [&](const AttentionBlock& block) {
      AttentionBlock flat{AttentionMode::aggregated, block.layers, block.heads, 0, columns,
                          std::vector<double>(columns, 0.0)};
      for (std::size_t c = 0; c < columns; ++c) {
        double sum = 0.0;
        for (std::size_t l = 0; l < block.layers; ++l)
          for (std::size_t h = 0; h < block.heads; ++h)
            for (std::size_t k = 0; k < block.rows; ++k) sum += block.at(l, h, k, c);
        flat.values[c] = sum / static_cast<double>(block.rows);
      }
      return flat;
    };
    inst.attention_actual = collapse(actual);
    inst.attention_calibration = collapse(calib);
  } else {
    inst.attention_actual = std::move(actual);
    inst.attention_calibration = std::move(calib);
  }
  return out;
}

}  // namespace reattn
