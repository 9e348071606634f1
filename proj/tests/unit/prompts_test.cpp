#include <gtest/gtest.h>

#include <fstream>

#include "n2i/error.hpp"
#include "n2i/prompts.hpp"
#include "workbench.hpp"

namespace n2i {
namespace {

TEST(PromptTemplate, ParseAndRender) {
  auto t = PromptTemplate::parse("demo", "#! version: 3\n#! note: ignored\n\nQ: {{query}}\nA: {{answer}}\n");
  EXPECT_EQ(t.version, "3");
  EXPECT_EQ(t.version_tag(), "demo@3");
  EXPECT_EQ(t.render({{"query", "x"}, {"answer", "{{query}}"}}), "Q: x\nA: {{query}}");
}

TEST(PromptTemplate, Errors) {
  EXPECT_THROW(PromptTemplate::parse("a", "no header {{query}}"), Error);
  EXPECT_THROW(PromptTemplate::parse("a", "#! version: 1\n{{mystery}}"), Error);
  auto t = PromptTemplate::parse("a", "#! version: 1\n{{query}} {{body}}");
  EXPECT_THROW((void)t.render({{"query", "q"}}), Error);
}

TEST(PromptLibrary, BuiltinsMatchPromptFolder) {
  auto lib = PromptLibrary::builtin();
  EXPECT_EQ(lib.names(), (std::vector<std::string>{"answer_relevance_grader", "binary_qa", "context_grader",
                                                   "generator", "groundedness_grader", "metadata_retriever",
                                                   "query_disambiguator"}));
  for (const auto& name : lib.names()) {
    const auto& t = lib.get(name);
    EXPECT_FALSE(t.version.empty());
    EXPECT_NE(t.body.find("### Task: " + name), std::string::npos) << name;
  }
  EXPECT_THROW((void)lib.get("poet"), Error);
}

TEST(PromptLibrary, DirectoryOverrides) {
  testkit::TempDir dir;
  std::ofstream(dir / "generator.txt") << "#! version: 9\n### Task: generator\n{{query}}\n{{contexts}}\n{{failure_context}}";
  std::ofstream(dir / "readme.md") << "ignored";
  auto lib = PromptLibrary::from_directory(dir.path());
  EXPECT_EQ(lib.get("generator").version_tag(), "generator@9");
  EXPECT_EQ(lib.get("binary_qa").version, PromptLibrary::builtin().get("binary_qa").version);
  EXPECT_THROW(PromptLibrary::from_directory(dir / "nope"), Error);
}

}  // namespace
}  // namespace n2i
