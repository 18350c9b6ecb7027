#include <gtest/gtest.h>

#include "cli_util.hpp"
#include "test_util.hpp"

namespace reattn {
namespace {

using testing::run_cli;

class Cli : public ::testing::Test {
 protected:
  Cli() : dir_(std::string("reattn_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name()) {}

  testing::CliResult run(const std::vector<std::string>& args) {
    return run_cli(args, dir_.path() / "io");
  }
  std::string path(const std::string& name) const { return dir_ / name; }

  // Default synthetic dump plus qrels.
  void synth(const std::string& dump = "dump.json", const std::string& qrels = "qrels.txt",
             std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"synth", "--seed", "7", "-o", path(dump), "--qrels", path(qrels)};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  testing::ScratchDir dir_;
};

TEST_F(Cli, RankEveryMethodMatchesLibrary) {
  synth();
  const auto inst = load_instance(path("dump.json"));
  for (Method m : kAllMethods) {
    const auto r = run({"rank", "-i", path("dump.json"), "-m", to_string(m)});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto expected = reattn_pipeline(inst, {m});
    EXPECT_EQ(r.out, format_runs({expected.run}, RunFormat::trec, to_string(m)));
  }
}

TEST_F(Cli, HeadMaskMatchesOracle) {
  synth("dump.json", "qrels.txt", {"--layers", "3", "--heads", "2"});
  write_file_atomic(path("mask.json"), "[[0, 1], [2, 0]]");
  const auto r = run({"rank", "-i", path("dump.json"), "--heads", path("mask.json"), "-f", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto inst = load_instance(path("dump.json"));
  const auto want = oracle::oracle_score(inst, {Method::reattn, HeadSet::of({{0, 1}, {2, 0}})});
  const auto got = run_from_json(nlohmann::json::parse(r.out));
  ASSERT_EQ(got.entries.size(), want.run.entries.size());
  for (std::size_t k = 0; k < got.entries.size(); ++k) {
    EXPECT_EQ(got.entries[k].doc_id, want.run.entries[k].doc_id);
    EXPECT_TRUE(testing::close(got.entries[k].score, want.run.entries[k].score));
  }
}

TEST_F(Cli, ExplainWritesBreakdown) {
  synth();
  const auto r = run({"rank", "-i", path("dump.json"), "-o", path("run.trec"), "--explain",
                      path("explain.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(read_file(path("explain.json")));
  EXPECT_EQ(report["method"], "reattn");
  EXPECT_EQ(report["documents"].size(), 8u);
  EXPECT_FALSE(read_file(path("run.trec")).empty());
}

TEST_F(Cli, RankErrors) {
  EXPECT_EQ(run({"rank", "-i", path("missing.json")}).code, 2);
  write_file_atomic(path("garbage.json"), "{");
  EXPECT_EQ(run({"rank", "-i", path("garbage.json")}).code, 2);
  synth();
  EXPECT_EQ(run({"rank", "-i", path("dump.json"), "-m", "bm25"}).code, 1);
  write_file_atomic(path("mask.json"), "[[5, 0]]");
  EXPECT_EQ(run({"rank", "-i", path("dump.json"), "--heads", path("mask.json")}).code, 1);
  EXPECT_EQ(run({"rank"}).code, 1);
}

TEST_F(Cli, RankDirectory) {
  std::filesystem::create_directories(path("dumps"));
  for (const char* seed : {"3", "1", "2"}) {
    const auto r = run({"synth", "--seed", seed, "-o", path(std::string("dumps/q") + seed + ".json")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto r = run({"rank", "-i", path("dumps"), "-m", "icr"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto runs = parse_trec_run(r.out, "stdout");
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(r.out.substr(0, 3), "q1 ");
}

TEST_F(Cli, EvalCutoffs) {
  synth();
  ASSERT_EQ(run({"rank", "-i", path("dump.json"), "-o", path("run.trec")}).code, 0);
  const auto ten = run({"eval", "-r", path("run.trec"), "-q", path("qrels.txt")});
  ASSERT_EQ(ten.code, 0) << ten.err;
  EXPECT_EQ(ten.out.substr(0, ten.out.find('\n')), "query\tndcg@10\trecall@10");
  const auto five = run({"eval", "-r", path("run.trec"), "-q", path("qrels.txt"), "-k", "5", "-k", "10"});
  ASSERT_EQ(five.code, 0);
  EXPECT_EQ(five.out.substr(0, five.out.find('\n')),
            "query\tndcg@5\trecall@5\tndcg@10\trecall@10");
  EXPECT_EQ(run({"eval", "-r", path("run.trec"), "-q", path("qrels.txt"), "-k", "0"}).code, 1);
  EXPECT_EQ(run({"eval", "-r", path("nope.trec"), "-q", path("qrels.txt")}).code, 2);
}

TEST_F(Cli, EvalPerfectRun) {
  write_file_atomic(path("qrels.txt"), "q 0 a 1\nq 0 b 0\n");
  write_file_atomic(path("run.trec"), "q Q0 a 1 0.9 t\nq Q0 b 2 0.1 t\n");
  const auto r = run({"eval", "-r", path("run.trec"), "-q", path("qrels.txt")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "query\tndcg@10\trecall@10\nq\t1.0000\t1.0000\nmean\t1.0000\t1.0000\n");
}

TEST_F(Cli, EvalJudgedQueryWithoutRun) {
  write_file_atomic(path("qrels.txt"), "q 0 a 1\nother 0 x 1\n");
  write_file_atomic(path("run.trec"), "q Q0 a 1 0.9 t\n");
  const auto r = run({"eval", "-r", path("run.trec"), "-q", path("qrels.txt")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("other\t0.0000\t0.0000"), std::string::npos);
  EXPECT_NE(r.err.find("other"), std::string::npos);
}

TEST_F(Cli, EvalNegativeRelevance) {
  write_file_atomic(path("qrels.txt"), "q 0 a -1\n");
  write_file_atomic(path("run.trec"), "q Q0 a 1 0.9 t\n");
  EXPECT_EQ(run({"eval", "-r", path("run.trec"), "-q", path("qrels.txt")}).code, 2);
}

TEST_F(Cli, SynthIsByteIdentical) {
  synth("a.json", "a.qrels");
  synth("b.json", "b.qrels");
  EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
  EXPECT_EQ(read_file(path("a.qrels")), read_file(path("b.qrels")));
}

TEST_F(Cli, SynthRejectsBadParameters) {
  EXPECT_EQ(run({"synth", "--overlap-rate", "1.5", "-o", path("x.json")}).code, 1);
  EXPECT_EQ(run({"synth", "--mode", "weird", "-o", path("x.json")}).code, 1);
  EXPECT_EQ(run({"synth", "--docs", "0", "-o", path("x.json")}).code, 1);
  EXPECT_FALSE(std::filesystem::exists(path("x.json")));
}

TEST_F(Cli, SynthAggregatedRanks) {
  synth("flat.json", "qrels.txt", {"--mode", "aggregated"});
  const auto r = run({"rank", "-i", path("flat.json"), "--explain", "-"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"provenance\": \"precomputed\""), std::string::npos);
}

TEST_F(Cli, Diff) {
  synth();
  ASSERT_EQ(run({"rank", "-i", path("dump.json"), "-m", "icr", "-o", path("icr.trec")}).code, 0);
  ASSERT_EQ(run({"rank", "-i", path("dump.json"), "-o", path("reattn.trec")}).code, 0);

  const auto same = run({"diff", path("icr.trec"), path("icr.trec"), "-q", path("qrels.txt")});
  ASSERT_EQ(same.code, 0) << same.err;
  EXPECT_NE(same.out.find("mean"), std::string::npos);
  EXPECT_EQ(same.out.find("\t-0"), std::string::npos);
  const auto last = same.out.substr(same.out.rfind("mean"));
  EXPECT_NE(last.find("0.0000\n"), std::string::npos);

  EXPECT_EQ(run({"diff", path("icr.trec"), path("reattn.trec"), "-q", path("qrels.txt")}).code, 0);
  EXPECT_EQ(run({"diff", path("icr.trec"), path("reattn.trec"), path("icr.trec"), "-q",
                 path("qrels.txt")})
                .code,
            1);

  write_file_atomic(path("other.trec"), "zz Q0 d01 1 0.5 t\n");
  EXPECT_EQ(run({"diff", path("icr.trec"), path("other.trec"), "-q", path("qrels.txt")}).code, 2);
}

}  // namespace
}  // namespace reattn
