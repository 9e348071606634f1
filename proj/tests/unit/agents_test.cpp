#include <gtest/gtest.h>

#include "function_backend.hpp"
#include "n2i/agents.hpp"
#include "n2i/error.hpp"
#include "rule_backend.hpp"
#include "workbench.hpp"

namespace n2i {
namespace {

using testkit::FunctionBackend;

Article article(std::string id, std::string body) {
  Article a;
  a.article_id = std::move(id);
  a.ordinal = 1;
  a.heading = "Article 1";
  a.body = std::move(body);
  return a;
}

GradedContext passing(std::string id, std::string body) {
  return {article(std::move(id), std::move(body)), AgentGrade{0.9, true, "fine", {}}};
}

struct Kit {
  std::shared_ptr<FunctionBackend> backend;
  AgentKit kit;
  explicit Kit(FunctionBackend::Fn fn)
      : backend(std::make_shared<FunctionBackend>(std::move(fn))), kit(testkit::make_test_kit(backend)) {}
};

TEST(AgentKind, Names) {
  for (auto k : kAllAgents) EXPECT_EQ(parse_agent_kind(to_string(k)), k);
  EXPECT_FALSE(parse_agent_kind("oracle"));
  EXPECT_FALSE(is_llm_agent(AgentKind::context_retriever));
  EXPECT_TRUE(is_llm_agent(AgentKind::binary_qa));
}

TEST(Metadata, ParsesAndNormalizes) {
  Kit k([](const CompletionRequest&) {
    return R"({"country": " ma ", "ban_topic": "plastic_bags", "text_type": "decree", "date_from": "2015-01-01",
               "date_to": "bad", "thematic_keywords": ["sacs"]})";
  });
  auto r = k.kit.metadata_retrieve("Is there a ban in Morocco?");
  EXPECT_EQ(r.value.country, "MA");
  EXPECT_EQ(r.value.text_type, TextType::decree);
  EXPECT_TRUE(r.value.date_from);
  EXPECT_FALSE(r.value.date_to);
  EXPECT_EQ(r.step.outcome, "ok");
  EXPECT_FALSE(r.degraded);
  auto f = r.value.to_filter();
  EXPECT_EQ(f.country, "MA");
  EXPECT_EQ(f.text_types, std::vector<TextType>{TextType::decree});
  EXPECT_THROW((void)k.kit.metadata_retrieve("  "), Error);
}

TEST(Metadata, RepromptThenDegrade) {
  int n = 0;
  Kit k([&](const CompletionRequest& r) {
    ++n;
    if (n == 1) {
      EXPECT_EQ(r.prompt.find("could not be used"), std::string::npos);
      return std::string("Morocco, I think.");
    }
    EXPECT_NE(r.prompt.find("could not be used"), std::string::npos);
    return std::string(R"({"country": "MA"})");
  });
  auto ok = k.kit.metadata_retrieve("q");
  EXPECT_EQ(ok.step.outcome, "reprompted");
  EXPECT_EQ(ok.value.country, "MA");

  Kit bad([](const CompletionRequest&) { return std::string(R"({"text_type": "poem"})"); });
  auto r = bad.kit.metadata_retrieve("q");
  EXPECT_TRUE(r.degraded);
  EXPECT_EQ(r.step.outcome, "degraded");
  EXPECT_TRUE(r.value.empty());
  EXPECT_EQ(bad.backend->requests().size(), 2u);
}

TEST(ContextGrade, ScoreIsMeanOfCriteria) {
  Kit k([](const CompletionRequest&) {
    return std::string(R"({"relevance": 0.8, "specificity": 0.4, "explanation": "partly"})");
  });
  auto r = k.kit.grade_context("q", article("A#1", "texte"));
  EXPECT_NEAR(r.value.score, 0.6, 1e-12);
  EXPECT_TRUE(r.value.pass);
  EXPECT_EQ(r.step.output["article_id"], "A#1");
  EXPECT_EQ(r.step.output["threshold"], kDefaultContextThreshold);
  auto strict = k.kit.grade_context("q", article("A#1", "texte"), 0.7);
  EXPECT_FALSE(strict.value.pass);
  EXPECT_EQ(strict.step.outcome, "fail");
  EXPECT_THROW((void)k.kit.grade_context("q", article("A#1", " ")), Error);
}

TEST(ContextGrade, OutOfRangeDegradesToFail) {
  Kit k([](const CompletionRequest&) {
    return std::string(R"({"relevance": 1.8, "specificity": 0.4, "explanation": "x"})");
  });
  auto r = k.kit.grade_context("q", article("A#1", "texte"));
  EXPECT_TRUE(r.degraded);
  EXPECT_FALSE(r.value.pass);
  EXPECT_EQ(r.value.score, 0.0);
  EXPECT_EQ(r.value.explanation, "ungradeable output");
}

TEST(Generate, NeedsPassingContext) {
  Kit k([](const CompletionRequest&) { return std::string("{}"); });
  std::vector<GradedContext> none{{article("A#1", "x"), AgentGrade{0.1, false, "no", {}}}};
  try {
    (void)k.kit.generate("q", none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoPassingContext);
  }
  EXPECT_TRUE(k.backend->requests().empty());
}

TEST(Generate, StripsCitationsOutsideContext) {
  Kit k([](const CompletionRequest&) {
    return std::string(R"({"answer": "Oui [A#1]. Voir aussi [Z#9].", "cited_article_ids": ["A#1", "Q#3"]})");
  });
  std::vector<GradedContext> ctx{passing("A#1", "interdit"), {article("B#2", "y"), AgentGrade{0.1, false, "", {}}}};
  auto r = k.kit.generate("q", ctx);
  EXPECT_EQ(r.value.cited_article_ids, std::vector<std::string>{"A#1"});
  EXPECT_EQ(r.value.text, "Oui [A#1]. Voir aussi .");
  EXPECT_EQ(r.step.outcome, "citations_stripped");
  EXPECT_EQ(r.step.output["stripped_citations"], (nlohmann::json{"Q#3", "Z#9"}));
  EXPECT_EQ(r.step.output["context_ids"], nlohmann::json{"A#1"});
  // the failing context is not shown to the model
  EXPECT_EQ(k.backend->requests()[0].prompt.find("B#2"), std::string::npos);
}

TEST(Generate, FeedbackUsesGenerativeTemperature) {
  Kit k([](const CompletionRequest&) { return std::string(R"({"answer": "Oui [A#1]."})"); });
  std::vector<GradedContext> ctx{passing("A#1", "x")};
  (void)k.kit.generate("q", ctx);
  auto r = k.kit.generate("q", ctx, std::string("claim 2 unsupported"));
  auto reqs = k.backend->requests();
  ASSERT_EQ(reqs.size(), 2u);
  EXPECT_EQ(reqs[0].temperature, 0.0);
  EXPECT_EQ(reqs[1].temperature, 0.9);
  EXPECT_NE(reqs[1].prompt.find("claim 2 unsupported"), std::string::npos);
  EXPECT_EQ(r.step.output["regeneration"], true);
  EXPECT_EQ(r.value.cited_article_ids, std::vector<std::string>{"A#1"});
}

TEST(Generate, ProseReplyIsDegradedAndEmptyIsAnError) {
  Kit prose([](const CompletionRequest&) { return std::string("Oui, c'est interdit [A#1]."); });
  std::vector<GradedContext> ctx{passing("A#1", "x")};
  auto r = prose.kit.generate("q", ctx);
  EXPECT_TRUE(r.degraded);
  EXPECT_EQ(r.value.text, "Oui, c'est interdit [A#1].");
  EXPECT_EQ(r.value.cited_article_ids, std::vector<std::string>{"A#1"});

  Kit empty([](const CompletionRequest&) { return std::string(""); });
  try {
    (void)empty.kit.generate("q", ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCompletion);
  }
}

TEST(Groundedness, NoCitationsIsForcedZero) {
  Kit k([](const CompletionRequest&) { return std::string(R"({"supported_claims_fraction": 1, "explanation": "x"})"); });
  std::vector<GradedContext> ctx{passing("A#1", "x")};
  auto r = k.kit.grade_groundedness({"Oui.", {}}, ctx);
  EXPECT_EQ(r.step.outcome, "forced");
  EXPECT_EQ(r.value.score, 0.0);
  EXPECT_FALSE(r.value.pass);
  EXPECT_TRUE(k.backend->requests().empty());
  EXPECT_THROW((void)k.kit.grade_groundedness({"Oui.", {"A#1"}}, {}), Error);
}

TEST(Groundedness, PartialSupportIsFlagged) {
  Kit k([](const CompletionRequest&) {
    return std::string(R"({"supported_claims_fraction": 0.5, "explanation": "second claim has no basis"})");
  });
  std::vector<GradedContext> ctx{passing("A#1", "x")};
  auto r = k.kit.grade_groundedness({"a [A#1]. b.", {"A#1"}}, ctx);
  EXPECT_FALSE(r.value.pass);
  EXPECT_EQ(r.step.outcome, "fail");
  EXPECT_NE(r.value.explanation.find("flagged"), std::string::npos);
}

TEST(AnswerRelevance, Threshold) {
  Kit k([](const CompletionRequest&) { return std::string(R"({"addresses_query": 0.5, "explanation": "ok"})"); });
  EXPECT_TRUE(k.kit.grade_answer_relevance({"a", {}}, "q").value.pass);
  EXPECT_FALSE(k.kit.grade_answer_relevance({"a", {}}, "q", 0.51).value.pass);
}

TEST(Disambiguate, RewriteAndNoOp) {
  Kit k([](const CompletionRequest& r) {
    if (r.prompt.find("(none)") != std::string::npos) return std::string("\n  \"Is the ban national?\"  \nextra");
    return std::string("is   THE ban permanent?");
  });
  auto a = k.kit.disambiguate("Is the ban permanent?");
  EXPECT_EQ(a.value, "Is the ban national?");
  EXPECT_EQ(a.step.outcome, "ok");
  auto b = k.kit.disambiguate("Is the ban permanent?", std::string("no evidence"));
  EXPECT_EQ(b.value, "Is the ban permanent?");
  EXPECT_EQ(b.step.outcome, "no_op");
  EXPECT_EQ(b.step.output["no_op"], true);
  for (const auto& req : k.backend->requests()) EXPECT_EQ(req.temperature, 0.9);
}

TEST(Disambiguate, EmptyReplyKeepsOriginal) {
  Kit k([](const CompletionRequest&) { return std::string(); });
  auto r = k.kit.disambiguate("q?");
  EXPECT_EQ(r.value, "q?");
  EXPECT_EQ(r.step.outcome, "no_op");
}

TEST(BinaryQa, ParsesOrDefaultsToZero) {
  Kit yes([](const CompletionRequest&) { return std::string(R"({"label": 1, "explanation": "affirmed"})"); });
  EXPECT_EQ(yes.kit.binary_qa("q", {"Oui.", {}}).value, (BinaryDecision{1, "affirmed"}));
  Kit junk([](const CompletionRequest&) { return std::string(R"({"label": 2, "explanation": "?"})"); });
  auto r = junk.kit.binary_qa("q", {"Oui.", {}});
  EXPECT_TRUE(r.degraded);
  EXPECT_EQ(r.value.label, 0);
  EXPECT_EQ(r.value.explanation, "unparseable verdict");
  EXPECT_EQ(junk.backend->requests().size(), 2u);
  EXPECT_THROW((void)yes.kit.binary_qa("q", {" ", {}}), Error);
}

TEST(StepRecord, JsonRoundTrip) {
  StepRecord s{AgentKind::generator, "generator@1", "abc", {{"answer", "x"}}, "why", 1.5, "ok"};
  nlohmann::json j = s;
  EXPECT_EQ(j["llm"], true);
  auto back = j.get<StepRecord>();
  EXPECT_EQ(back.agent, s.agent);
  EXPECT_EQ(back.output, s.output);
  EXPECT_EQ(back.outcome, "ok");
  j["agent"] = "wizard";
  EXPECT_THROW(j.get<StepRecord>(), Error);
}

TEST(AgentKit, DescribesBackends) {
  Kit k([](const CompletionRequest&) { return std::string("x"); });
  auto d = k.kit.describe_backends();
  EXPECT_EQ(d["generative"]["temperature"], 0.9);
  EXPECT_EQ(d["deterministic"]["backend"], "function");
  EXPECT_THROW(AgentKit(PromptLibrary::builtin(), {}, {}), Error);
}

}  // namespace
}  // namespace n2i
