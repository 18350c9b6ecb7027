#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "reattn/core.hpp"
#include "reattn/io.hpp"

namespace reattn {

/// Graded judgments per query: doc_id -> relevance. Unjudged means 0.
struct Qrels {
  std::map<std::string, std::map<std::string, int>> judgments;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [q, docs] : judgments) n += docs.size();
    return n;
  }

  int relevance(const std::string& query_id, const std::string& doc_id) const {
    const auto q = judgments.find(query_id);
    if (q == judgments.end()) return 0;
    const auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
  }

  const std::map<std::string, int>* for_query(const std::string& query_id) const {
    const auto q = judgments.find(query_id);
    return q == judgments.end() ? nullptr : &q->second;
  }
};

/// Parses `<query_id> 0 <doc_id> <rel>` lines. Duplicate pairs keep the last
/// value and append a warning.
inline Qrels parse_qrels(const std::string& text, const std::string& where,
                         std::vector<std::string>* warnings = nullptr) {
  Qrels qrels;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string qid, iter, doc, rel_text, extra;
    if (!(fields >> qid >> iter >> doc >> rel_text) || (fields >> extra))
      throw ParseError(where + ":" + std::to_string(line_no) +
                       ": expected '<query_id> 0 <doc_id> <rel>'");
    int rel = 0;
    try {
      std::size_t used = 0;
      rel = std::stoi(rel_text, &used);
      if (used != rel_text.size()) throw std::invalid_argument("rel");
    } catch (const std::exception&) {
      throw ParseError(where + ":" + std::to_string(line_no) + ": bad relevance '" +
                       rel_text + "'");
    }
    if (rel < 0)
      throw ParseError(where + ":" + std::to_string(line_no) + ": negative relevance");
    auto [it, inserted] = qrels.judgments[qid].insert_or_assign(doc, rel);
    if (!inserted && warnings)
      warnings->push_back(where + ":" + std::to_string(line_no) + ": duplicate judgment for (" +
                          qid + ", " + doc + "), keeping the last one");
  }
  return qrels;
}

inline Qrels load_qrels(const std::filesystem::path& path,
                        std::vector<std::string>* warnings = nullptr) {
  return parse_qrels(read_file(path), path.string(), warnings);
}

inline std::string format_qrels(const Qrels& qrels) {
  std::string out;
  for (const auto& [qid, docs] : qrels.judgments)
    for (const auto& [doc, rel] : docs)
      out += qid + " 0 " + doc + " " + std::to_string(rel) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// nDCG@k with linear gain rel / log2(rank + 1). Zero when nothing is relevant.
inline double ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw DomainError("ndcg_at_k: k must be >= 1");
  const auto* judged = qrels.for_query(run.query_id);
  if (!judged) return 0.0;

  std::vector<int> ideal;
  for (const auto& [doc, rel] : *judged) ideal.push_back(rel);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ideal.size()); ++r)
    idcg += ideal[r] / std::log2(static_cast<double>(r) + 2.0);
  if (idcg <= 0.0) return 0.0;

  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, run.entries.size()); ++r) {
    const auto it = judged->find(run.entries[r].doc_id);
    if (it != judged->end()) dcg += it->second / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

/// Share of relevant (rel > 0) documents retrieved in the top k.
inline double recall_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw DomainError("recall_at_k: k must be >= 1");
  const auto* judged = qrels.for_query(run.query_id);
  if (!judged) return 0.0;
  std::size_t relevant = 0;
  for (const auto& [doc, rel] : *judged) relevant += rel > 0;
  if (relevant == 0) return 0.0;
  std::size_t found = 0;
  for (std::size_t r = 0; r < std::min(k, run.entries.size()); ++r)
    found += qrels.relevance(run.query_id, run.entries[r].doc_id) > 0;
  return static_cast<double>(found) / static_cast<double>(relevant);
}

struct Metric {
  enum class Kind { ndcg, recall };
  Kind kind = Kind::ndcg;
  std::size_t k = 10;

  std::string name() const {
    return std::string(kind == Kind::ndcg ? "ndcg@" : "recall@") + std::to_string(k);
  }
  double operator()(const Run& run, const Qrels& qrels) const {
    return kind == Kind::ndcg ? ndcg_at_k(run, qrels, k) : recall_at_k(run, qrels, k);
  }
};

/// nDCG@k and Recall@k for each cutoff, in that order.
inline std::vector<Metric> standard_metrics(const std::vector<std::size_t>& cutoffs) {
  std::vector<Metric> metrics;
  for (std::size_t k : cutoffs) {
    metrics.push_back({Metric::Kind::ndcg, k});
    metrics.push_back({Metric::Kind::recall, k});
  }
  return metrics;
}

inline std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

struct EvaluationRow {
  std::string query_id;
  std::vector<double> values;
};

struct Evaluation {
  std::vector<Metric> metrics;
  std::vector<EvaluationRow> rows;
  std::vector<double> mean;
  std::vector<std::string> missing_queries;  // judged but absent from the run
};

/// Scores every query present in the runs or in the qrels; judged queries
/// without a run score 0.
inline Evaluation evaluate(const std::vector<Run>& runs, const Qrels& qrels,
                           std::vector<Metric> metrics) {
  Evaluation ev;
  ev.metrics = std::move(metrics);
  std::map<std::string, const Run*> by_query;
  for (const auto& run : runs) by_query[run.query_id] = &run;
  std::set<std::string> queries;
  for (const auto& [qid, run] : by_query) queries.insert(qid);
  for (const auto& [qid, docs] : qrels.judgments) queries.insert(qid);

  ev.mean.assign(ev.metrics.size(), 0.0);
  for (const auto& qid : queries) {
    EvaluationRow row{qid, {}};
    const auto it = by_query.find(qid);
    const Run empty{qid, {}};
    if (it == by_query.end()) ev.missing_queries.push_back(qid);
    const Run& run = it == by_query.end() ? empty : *it->second;
    for (const auto& m : ev.metrics) row.values.push_back(m(run, qrels));
    for (std::size_t i = 0; i < row.values.size(); ++i) ev.mean[i] += row.values[i];
    ev.rows.push_back(std::move(row));
  }
  if (!ev.rows.empty())
    for (double& m : ev.mean) m /= static_cast<double>(ev.rows.size());
  return ev;
}

inline std::string format_evaluation(const Evaluation& ev) {
  std::string out = "query";
  for (const auto& m : ev.metrics) out += "\t" + m.name();
  out += "\n";
  for (const auto& row : ev.rows) {
    out += row.query_id;
    for (double v : row.values) out += "\t" + format_metric(v);
    out += "\n";
  }
  out += "mean";
  for (double v : ev.mean) out += "\t" + format_metric(v);
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Run comparison
// ---------------------------------------------------------------------------

struct MetricDelta {
  Metric metric;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double delta = 0.0;  // b - a
};

struct QueryDelta {
  std::string query_id;
  std::vector<double> a;
  std::vector<double> b;
};

struct RunComparison {
  std::vector<MetricDelta> summary;
  std::vector<QueryDelta> queries;
};

/// Per-query and mean metric differences (b - a). The runs must cover the
/// same queries.
inline RunComparison compare_runs(const std::vector<Run>& runs_a,
                                  const std::vector<Run>& runs_b, const Qrels& qrels,
                                  const std::vector<Metric>& metrics) {
  std::map<std::string, const Run*> a, b;
  for (const auto& r : runs_a) a[r.query_id] = &r;
  for (const auto& r : runs_b) b[r.query_id] = &r;
  for (const auto& [qid, r] : a)
    if (!b.contains(qid)) throw KeyError("query " + qid + " missing from the second run");
  for (const auto& [qid, r] : b)
    if (!a.contains(qid)) throw KeyError("query " + qid + " missing from the first run");

  RunComparison cmp;
  for (const auto& m : metrics) cmp.summary.push_back({m});
  for (const auto& [qid, run_a] : a) {
    QueryDelta q{qid, {}, {}};
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      q.a.push_back(metrics[i](*run_a, qrels));
      q.b.push_back(metrics[i](*b.at(qid), qrels));
      cmp.summary[i].mean_a += q.a.back();
      cmp.summary[i].mean_b += q.b.back();
    }
    cmp.queries.push_back(std::move(q));
  }
  const double n = static_cast<double>(std::max<std::size_t>(cmp.queries.size(), 1));
  for (auto& s : cmp.summary) {
    s.mean_a /= n;
    s.mean_b /= n;
    s.delta = s.mean_b - s.mean_a;
  }
  return cmp;
}

inline std::string format_comparison(const RunComparison& cmp) {
  std::string out = "query";
  for (const auto& s : cmp.summary) {
    const auto name = s.metric.name();
    out += "\t" + name + ":a\t" + name + ":b\t" + name + ":delta";
  }
  out += "\n";
  auto cells = [](double a, double b) {
    return "\t" + format_metric(a) + "\t" + format_metric(b) + "\t" + format_metric(b - a);
  };
  for (const auto& q : cmp.queries) {
    out += q.query_id;
    for (std::size_t i = 0; i < q.a.size(); ++i) out += cells(q.a[i], q.b[i]);
    out += "\n";
  }
  out += "mean";
  for (const auto& s : cmp.summary) out += cells(s.mean_a, s.mean_b);
  out += "\n";
  return out;
}

}  // namespace reattn
