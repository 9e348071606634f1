#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "n2i/cli.hpp"
#include "n2i/grid.hpp"
#include "n2i/trace.hpp"
#include "workbench.hpp"

#ifndef N2I_CLI_PATH
#error "N2I_CLI_PATH must name the n2i executable"
#endif

namespace n2i {
namespace {

std::optional<std::string> no_env(std::string_view) { return std::nullopt; }

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli {
 public:
  Outcome run(std::vector<std::string> args) const {
    std::vector<std::string> full{"--store", (dir / "store").string(), "--trace-dir", (dir / "traces").string()};
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream out, err;
    Outcome o;
    o.code = run_cli(full, out, err, no_env);
    o.out = out.str();
    o.err = err.str();
    return o;
  }

  void ingest_and_index() const {
    ASSERT_EQ(run({"ingest", "--input", testkit::fixture_path("corpus").string()}).code, 0);
    ASSERT_EQ(run({"index"}).code, 0);
  }

  testkit::TempDir dir;
};

std::string scripted() { return testkit::fixture_path("scripted/plastic_bags.json").string(); }

std::string q1_ma() { return instantiate_question(indicator_questions()[0], "plastic_bags", "MA"); }

TEST(CliBinary, VersionAndUsageExitCodes) {
  auto status = [](const std::string& args) {
    const std::string cmd = std::string(N2I_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  EXPECT_EQ(status("version"), 0);
  EXPECT_EQ(status(""), 2);
  EXPECT_EQ(status("frobnicate"), 2);
  EXPECT_EQ(status("ask"), 2);

  FILE* pipe = ::popen((std::string(N2I_CLI_PATH) + " version").c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  char buf[64] = {};
  ASSERT_NE(std::fgets(buf, sizeof buf, pipe), nullptr);
  ::pclose(pipe);
  EXPECT_TRUE(std::string(buf).starts_with("n2i "));
}

TEST(Cli, IngestReportsCounts) {
  Cli cli;
  auto r = cli.run({"ingest", "--input", testkit::fixture_path("ingest_small").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("4 articles in 2 sources"), std::string::npos) << r.out;
  auto j = cli.run({"--json", "ingest", "--input", testkit::fixture_path("ingest_small").string(), "--corpus", "tn"});
  auto parsed = nlohmann::json::parse(j.out);
  EXPECT_EQ(parsed["articles"], 4);
  EXPECT_EQ(parsed["corpus"], "tn");
  EXPECT_TRUE(std::filesystem::exists(parsed["path"].get<std::string>()));
}

TEST(Cli, UsageErrors) {
  Cli cli;
  EXPECT_EQ(cli.run({"ingest"}).code, 2);
  EXPECT_EQ(cli.run({"ingest", "--input", "/definitely/not/here"}).code, 2);
  EXPECT_EQ(cli.run({"grid", "--country", "MA"}).code, 2);
  cli.ingest_and_index();
  auto r = cli.run({"ask", "--question", "x", "--mode", "turbo", "--scripted", scripted()});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, MissingIndexIsADomainError) {
  Cli cli;
  ASSERT_EQ(cli.run({"ingest", "--input", testkit::fixture_path("corpus").string()}).code, 0);
  auto r = cli.run({"ask", "--question", q1_ma(), "--scripted", scripted()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("IndexMissing"), std::string::npos) << r.err;
  EXPECT_EQ(cli.run({"index", "--corpus", "nope"}).code, 1);
}

TEST(Cli, AskWritesAnAuditableTrace) {
  Cli cli;
  cli.ingest_and_index();
  auto r = cli.run({"--json", "ask", "--question", q1_ma(), "--country", "MA", "--ban", "plastic_bags", "--scripted",
                    scripted()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["label"], 1);
  EXPECT_EQ(j["exit_path"], "decided");
  EXPECT_FALSE(j["cited_article_ids"].empty());
  const std::string trace = j["trace"];
  auto audit = cli.run({"audit", trace, "--corpus", "default"});
  EXPECT_EQ(audit.code, 0) << audit.out;
  EXPECT_NE(audit.out.find("0 violation(s)"), std::string::npos);

  auto text = cli.run({"ask", "--question", q1_ma(), "--country", "MA", "--ban", "plastic_bags", "--scripted",
                       scripted()});
  EXPECT_NE(text.out.find("trace: "), std::string::npos);
}

TEST(Cli, AskWithUnknownPromptKeepsPartialTrace) {
  Cli cli;
  cli.ingest_and_index();
  auto r = cli.run({"ask", "--question", "Something never recorded?", "--scripted", scripted()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("partial trace: "), std::string::npos) << r.err;
  const auto path = r.err.substr(r.err.find("partial trace: ") + 15);
  auto t = read_trace(path.substr(0, path.find('\n')));
  EXPECT_TRUE(t.error);
}

TEST(Cli, AuditFlagsTamperedTraces) {
  Cli cli;
  auto clean = cli.run({"audit", testkit::fixture_path("traces/clean_full.json").string()});
  EXPECT_EQ(clean.code, 0) << clean.out;
  auto bad = cli.run({"--json", "audit", testkit::fixture_path("traces/tampered_disabled_agent.json").string()});
  EXPECT_EQ(bad.code, 1);
  auto j = nlohmann::json::parse(bad.out);
  EXPECT_EQ(j["run_id"], "tampered-disabled-agent");
  EXPECT_FALSE(j["violations"].empty());
  testkit::TempDir dir;
  std::ofstream(dir / "junk.json") << "[]";
  EXPECT_EQ(cli.run({"audit", (dir / "junk.json").string()}).code, 1);
}

TEST(Cli, GridScoresAgainstGold) {
  Cli cli;
  cli.ingest_and_index();
  auto r = cli.run({"grid", "--country", "SN", "--ban", "plastic_bags", "--scripted", scripted(), "--gold",
                    testkit::fixture_path("gold/plastic_bags.jsonl").string(), "--jobs", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("accuracy 1.000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Plastic bags / SN (Full)"), std::string::npos);
}

TEST(Cli, AblationWritesReports) {
  Cli cli;
  cli.ingest_and_index();
  const auto prefix = (cli.dir / "out" / "abl").string();
  auto r = cli.run({"ablation", "--ban", "plastic_bags", "--country", "MA", "--country", "SN", "--gold",
                    testkit::fixture_path("gold/plastic_bags.jsonl").string(), "--scripted", scripted(), "--out",
                    prefix, "--per-country"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Without-Hall"), std::string::npos);
  EXPECT_NE(r.out.find("Baseline"), std::string::npos);
  std::ifstream csv(prefix + ".csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "Ban,Configuration,Accuracy,Precision,Recall,Specificity,F1-Score,Balanced Acc.");
  std::ifstream json(prefix + ".json");
  auto j = nlohmann::json::parse(json);
  EXPECT_EQ(j["rows"].size(), 3u);
  EXPECT_EQ(j["per_country_rows"].size(), 6u);
  EXPECT_EQ(j["rows"][0]["metrics"]["accuracy"], 1.0);

  auto bad = cli.run({"ablation", "--ban", "plastic_bags", "--country", "TN", "--gold",
                      testkit::fixture_path("gold/plastic_bags.jsonl").string(), "--scripted", scripted()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("MissingGold"), std::string::npos);
}

TEST(Cli, RecordThenReplay) {
  Cli cli;
  cli.ingest_and_index();
  const auto rec = (cli.dir / "rec.json").string();
  auto first = cli.run({"--json", "ask", "--question", q1_ma(), "--country", "MA", "--ban", "plastic_bags",
                        "--scripted", scripted(), "--record", rec});
  ASSERT_EQ(first.code, 0) << first.err;
  auto recorded = nlohmann::json::parse(std::ifstream(rec));
  EXPECT_EQ(recorded["format"], "n2i-scripted");
  EXPECT_GE(recorded["replies"].size(), 5u);
  auto second = cli.run({"--json", "ask", "--question", q1_ma(), "--country", "MA", "--ban", "plastic_bags",
                         "--scripted", rec});
  ASSERT_EQ(second.code, 0) << second.err;
  auto a = nlohmann::json::parse(first.out), b = nlohmann::json::parse(second.out);
  EXPECT_EQ(a["label"], b["label"]);
  EXPECT_EQ(a["cited_article_ids"], b["cited_article_ids"]);
  auto ta = read_trace(a["trace"].get<std::string>()), tb = read_trace(b["trace"].get<std::string>());
  auto ja = comparable_trace_json(ta), jb = comparable_trace_json(tb);
  ja.erase("backends");
  jb.erase("backends");
  EXPECT_EQ(ja, jb);
}

}  // namespace
}  // namespace n2i
