#include <gtest/gtest.h>

#include <fstream>

#include "n2i/error.hpp"
#include "n2i/trace.hpp"
#include "workbench.hpp"

namespace n2i {
namespace {

PipelineTrace fixture_trace(const std::string& name) { return read_trace(testkit::fixture_path("traces/" + name)); }

bool mentions(const AuditReport& r, std::string_view needle) {
  for (const auto& v : r.violations) {
    if (v.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string joined(const AuditReport& r) {
  std::string s;
  for (const auto& v : r.violations) s += v + "\n";
  return s;
}

TEST(Audit, CleanFixturesPass) {
  auto corpus = ingest(load_source_directory(testkit::fixture_path("corpus")), "c");
  for (const char* name : {"clean_full.json", "clean_without_hall.json"}) {
    auto r = resume_check(fixture_trace(name), &corpus);
    EXPECT_TRUE(r.ok()) << name << "\n" << joined(r);
  }
}

TEST(Audit, DeletedGraderStep) {
  auto r = resume_check(fixture_trace("tampered_deleted_step.json"));
  EXPECT_TRUE(mentions(r, "cannot follow")) << joined(r);
}

TEST(Audit, DisabledAgent) {
  auto r = resume_check(fixture_trace("tampered_disabled_agent.json"));
  EXPECT_TRUE(mentions(r, "disabled agent executed: groundedness_grader")) << joined(r);
}

TEST(Audit, DanglingCitation) {
  auto corpus = ingest(load_source_directory(testkit::fixture_path("corpus")), "c");
  auto r = resume_check(fixture_trace("tampered_dangling_citation.json"), &corpus);
  EXPECT_TRUE(mentions(r, "dangling citation: MA-77-15#42")) << joined(r);
}

TEST(Audit, LoopCounterMismatch) {
  auto t = fixture_trace("clean_full.json");
  t.loop_counter = 1;
  auto r = resume_check(t);
  EXPECT_TRUE(mentions(r, "loop counter 1 does not match 0")) << joined(r);
}

TEST(Audit, DegradedExitWithPositiveLabel) {
  auto t = fixture_trace("clean_full.json");
  t.exit_path = ExitPath::degraded_override;
  t.degraded = true;
  ASSERT_EQ(t.decision->label, 1);
  auto r = resume_check(t);
  EXPECT_TRUE(mentions(r, "degraded exit path degraded_override produced label 1")) << joined(r);
}

TEST(Audit, BlankExplanationAndMissingDecision) {
  auto t = fixture_trace("clean_without_hall.json");
  t.steps[1].explanation = "  ";
  t.decision.reset();
  auto r = resume_check(t);
  EXPECT_TRUE(mentions(r, "step 2 (context_retriever) has no explanation")) << joined(r);
  EXPECT_TRUE(mentions(r, "no final decision")) << joined(r);
}

TEST(Audit, SwappedSteps) {
  auto t = fixture_trace("clean_full.json");
  std::swap(t.steps[3], t.steps[4]);
  EXPECT_FALSE(resume_check(t).ok());
}

TEST(Audit, LabelDiffersFromVerdict) {
  auto t = fixture_trace("clean_full.json");
  t.decision->label = 0;
  auto r = resume_check(t);
  EXPECT_TRUE(mentions(r, "differs from the binary_qa verdict")) << joined(r);
}

TEST(Audit, PartialTraceSkipsExitChecks) {
  auto t = fixture_trace("clean_full.json");
  t.steps.resize(3);
  t.decision.reset();
  t.exit_path.reset();
  t.cited_article_ids.clear();
  t.error = "BackendUnavailable: down";
  EXPECT_TRUE(resume_check(t).ok()) << joined(resume_check(t));
}

TEST(TraceJson, RoundTripAndComparable) {
  auto t = fixture_trace("clean_full.json");
  auto back = trace_from_json(trace_to_json(t));
  EXPECT_EQ(trace_to_json(back), trace_to_json(t));
  auto a = t;
  a.run_id = "other";
  a.started_at = "2030-01-01T00:00:00Z";
  a.steps[0].elapsed_ms = 99;
  EXPECT_EQ(comparable_trace_json(a), comparable_trace_json(t));
  a.steps[0].explanation += "!";
  EXPECT_NE(comparable_trace_json(a), comparable_trace_json(t));
}

TEST(TraceJson, WriteUsesRunId) {
  testkit::TempDir dir;
  auto t = fixture_trace("clean_without_hall.json");
  auto path = write_trace(t, dir / "nested");
  EXPECT_EQ(path.filename(), "clean-without-hall.json");
  EXPECT_EQ(trace_to_json(read_trace(path)), trace_to_json(t));
}

TEST(TraceJson, MalformedInput) {
  auto code = [](const nlohmann::json& j) {
    try {
      (void)trace_from_json(j);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  auto good = trace_to_json(fixture_trace("clean_full.json"));
  EXPECT_EQ(code(nlohmann::json::array()), ErrorCode::MalformedTrace);
  auto j = good;
  j["schema"] = "n2i-trace/0";
  EXPECT_EQ(code(j), ErrorCode::MalformedTrace);
  j = good;
  j.erase("steps");
  EXPECT_EQ(code(j), ErrorCode::MalformedTrace);
  j = good;
  j["exit_path"] = "teleported";
  EXPECT_EQ(code(j), ErrorCode::MalformedTrace);
  j = good;
  j["steps"][0]["agent"] = "wizard";
  EXPECT_EQ(code(j), ErrorCode::MalformedTrace);
  j = good;
  j["config"]["mode"] = "turbo";
  EXPECT_EQ(code(j), ErrorCode::MalformedTrace);

  testkit::TempDir dir;
  std::ofstream(dir / "x.json") << "{";
  EXPECT_THROW(read_trace(dir / "x.json"), Error);
  EXPECT_THROW(read_trace(dir / "absent.json"), Error);
}

}  // namespace
}  // namespace n2i
