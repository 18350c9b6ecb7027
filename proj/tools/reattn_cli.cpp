// Command-line front end: rank dumps, evaluate and diff runs, generate
// synthetic fixtures.
//
// Exit codes: 0 success, 1 usage or validation failure, 2 I/O or parse failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "reattn/reattn.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kIoFailure = 2;

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("reattn");
  logger->set_pattern("reattn: %l: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("REATTN_LOG")) {
    const std::string level = env;
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "warn") spdlog::set_level(spdlog::level::warn);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring unknown REATTN_LOG level '{}'", level);
  }
}

/// Maps library exceptions onto the exit-code contract.
int report_failure(const std::exception& e) {
  spdlog::error("{}", e.what());
  if (dynamic_cast<const reattn::IoError*>(&e) || dynamic_cast<const reattn::ParseError*>(&e) ||
      dynamic_cast<const reattn::VersionError*>(&e))
    return kIoFailure;
  return kInvalid;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    reattn::write_file_atomic(path, content);
  }
}

std::vector<fs::path> dump_files(const fs::path& input) {
  if (!fs::exists(input)) throw reattn::IoError("no such file or directory: " + input.string());
  if (!fs::is_directory(input)) return {input};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw reattn::IoError("no .json dumps in " + input.string());
  return files;
}

// ---------------------------------------------------------------------------

struct RankArgs {
  std::string input;
  std::string method = "reattn";
  std::string heads;
  std::string output = "-";
  std::string format = "trec";
  std::string explain;
  std::string tag;
};

int cmd_rank(const RankArgs& args) {
  const auto method = reattn::parse_method(args.method);
  if (!method) {
    spdlog::error("unknown method '{}'", args.method);
    return kInvalid;
  }
  try {
    reattn::PipelineConfig cfg;
    cfg.method = *method;
    if (!args.heads.empty()) cfg.heads = reattn::load_head_set(args.heads);

    const auto files = dump_files(args.input);
    std::vector<std::future<reattn::PipelineResult>> jobs;
    for (const auto& file : files) {
      jobs.push_back(std::async(std::launch::async, [file, &cfg] {
        const auto inst = reattn::load_instance(file);
        if (inst.attention_actual.mode == reattn::AttentionMode::aggregated && !cfg.heads.is_all())
          spdlog::warn("{}: aggregated dump, head mask ignored", file.string());
        return reattn::reattn_pipeline(inst, cfg);
      }));
    }
    std::vector<reattn::PipelineResult> results;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      results.push_back(jobs[i].get());
      spdlog::info("{}: ranked {} documents", files[i].string(), results.back().run.entries.size());
    }

    std::vector<reattn::Run> runs;
    for (const auto& r : results) runs.push_back(r.run);
    const auto format = args.format == "json" ? reattn::RunFormat::json : reattn::RunFormat::trec;
    const std::string tag = args.tag.empty() ? reattn::to_string(*method) : args.tag;
    write_output(args.output, reattn::format_runs(runs, format, tag));

    if (!args.explain.empty()) {
      nlohmann::json report;
      if (results.size() == 1) {
        report = reattn::explain_report(results.front());
      } else {
        report = nlohmann::json::array();
        for (const auto& r : results) report.push_back(reattn::explain_report(r));
      }
      write_output(args.explain, report.dump(2) + "\n");
    }
    return kOk;
  } catch (const std::exception& e) {
    return report_failure(e);
  }
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string run;
  std::string qrels;
  std::vector<std::size_t> cutoffs;
  std::string output = "-";
};

reattn::Qrels load_qrels_logged(const std::string& path) {
  std::vector<std::string> warnings;
  auto qrels = reattn::load_qrels(path, &warnings);
  for (const auto& w : warnings) spdlog::warn("{}", w);
  return qrels;
}

bool valid_cutoffs(const std::vector<std::size_t>& cutoffs) {
  if (std::find(cutoffs.begin(), cutoffs.end(), 0) == cutoffs.end()) return true;
  spdlog::error("cutoffs must be >= 1");
  return false;
}

int cmd_eval(EvalArgs args) {
  if (args.cutoffs.empty()) args.cutoffs = {10};
  if (!valid_cutoffs(args.cutoffs)) return kInvalid;
  try {
    const auto runs = reattn::load_runs(args.run);
    const auto qrels = load_qrels_logged(args.qrels);
    const auto ev = reattn::evaluate(runs, qrels, reattn::standard_metrics(args.cutoffs));
    for (const auto& qid : ev.missing_queries)
      spdlog::warn("query {} has judgments but no run; scored 0", qid);
    write_output(args.output, reattn::format_evaluation(ev));
    return kOk;
  } catch (const std::exception& e) {
    const int code = report_failure(e);
    return code == kInvalid ? kIoFailure : code;
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  reattn::SynthParams params;
  std::string mode = "per_head";
  std::string out;
  std::string qrels;
};

int cmd_synth(SynthArgs args) {
  try {
    if (args.mode == "aggregated") {
      args.params.mode = reattn::AttentionMode::aggregated;
    } else if (args.mode != "per_head") {
      spdlog::error("unknown mode '{}'", args.mode);
      return kInvalid;
    }
    const auto synth = reattn::generate_instance(args.params);
    reattn::save_instance(synth.instance, args.out);
    if (!args.qrels.empty()) reattn::write_file_atomic(args.qrels, reattn::format_qrels(synth.qrels));
    spdlog::info("wrote {} ({} documents)", args.out, synth.instance.documents.size());
    return kOk;
  } catch (const reattn::ParamError& e) {
    spdlog::error("{}", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    return report_failure(e);
  }
}

// ---------------------------------------------------------------------------

struct DiffArgs {
  std::vector<std::string> runs;
  std::string qrels;
  std::vector<std::size_t> cutoffs;
  std::string output = "-";
};

int cmd_diff(DiffArgs args) {
  if (args.runs.size() != 2) {
    spdlog::error("diff takes exactly two runs, got {}", args.runs.size());
    return kInvalid;
  }
  if (args.cutoffs.empty()) args.cutoffs = {10};
  if (!valid_cutoffs(args.cutoffs)) return kInvalid;
  try {
    const auto a = reattn::load_runs(args.runs[0]);
    const auto b = reattn::load_runs(args.runs[1]);
    const auto qrels = load_qrels_logged(args.qrels);
    const auto cmp = reattn::compare_runs(a, b, qrels, reattn::standard_metrics(args.cutoffs));
    write_output(args.output, reattn::format_comparison(cmp));
    return kOk;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kIoFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Attention-based document re-ranking"};
  app.require_subcommand(1);

  RankArgs rank;
  auto* rank_cmd = app.add_subcommand("rank", "Score and rank the documents of one dump or a directory of dumps");
  rank_cmd->add_option("-i,--input", rank.input, "Dump file or directory of dumps")->required();
  rank_cmd->add_option("-m,--method", rank.method, "icr | idf-only | entropy-only | reattn");
  rank_cmd->add_option("--heads", rank.heads, "JSON list of [layer, head] pairs");
  rank_cmd->add_option("-o,--output", rank.output, "Run file ('-' for stdout)");
  rank_cmd->add_option("-f,--format", rank.format, "trec | json")
      ->check(CLI::IsMember({"trec", "json"}));
  rank_cmd->add_option("--explain", rank.explain, "Write the per-document score breakdown here");
  rank_cmd->add_option("--tag", rank.tag, "Run tag for TREC output (default: method name)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "nDCG@k and Recall@k of a run");
  eval_cmd->add_option("-r,--run", eval.run, "Run file (TREC or JSON)")->required();
  eval_cmd->add_option("-q,--qrels", eval.qrels, "TREC qrels file")->required();
  eval_cmd->add_option("-k", eval.cutoffs, "Cutoff (repeatable, default 10)");
  eval_cmd->add_option("-o,--output", eval.output, "Report file ('-' for stdout)");

  SynthArgs synth;
  auto& sp = synth.params;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dump and its qrels");
  synth_cmd->add_option("--seed", sp.seed);
  synth_cmd->add_option("--docs", sp.n_docs);
  synth_cmd->add_option("--min-tokens", sp.min_tokens);
  synth_cmd->add_option("--max-tokens", sp.max_tokens);
  synth_cmd->add_option("--layers", sp.n_layers);
  synth_cmd->add_option("--heads", sp.n_heads);
  synth_cmd->add_option("--query-len", sp.query_len);
  synth_cmd->add_option("--overlap-rate", sp.overlap_rate);
  synth_cmd->add_option("--concentration", sp.concentration);
  synth_cmd->add_option("--relevant", sp.relevant_doc_count);
  synth_cmd->add_option("--distractors", sp.distractor_count);
  synth_cmd->add_option("--stuffing-rate", sp.stuffing_rate);
  synth_cmd->add_option("--lexical-boost", sp.lexical_boost);
  synth_cmd->add_option("--relevance-boost", sp.relevance_boost);
  synth_cmd->add_option("--noise", sp.noise);
  synth_cmd->add_flag("--broad-relevant", sp.broad_relevant);
  synth_cmd->add_flag("--saturate", sp.saturate_query_terms, "Put every query word in every document");
  synth_cmd->add_option("--mode", synth.mode, "per_head | aggregated");
  synth_cmd->add_option("-o,--out", synth.out, "Dump output path")->required();
  synth_cmd->add_option("--qrels", synth.qrels, "Qrels output path");

  DiffArgs diff;
  auto* diff_cmd = app.add_subcommand("diff", "Per-query metric deltas between two runs");
  diff_cmd->add_option("runs", diff.runs, "Two run files")->required();
  diff_cmd->add_option("-q,--qrels", diff.qrels, "TREC qrels file")->required();
  diff_cmd->add_option("-k", diff.cutoffs, "Cutoff (repeatable, default 10)");
  diff_cmd->add_option("-o,--output", diff.output, "Report file ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  if (*rank_cmd) return cmd_rank(rank);
  if (*eval_cmd) return cmd_eval(eval);
  if (*synth_cmd) return cmd_synth(synth);
  if (*diff_cmd) return cmd_diff(diff);
  return kInvalid;
}
