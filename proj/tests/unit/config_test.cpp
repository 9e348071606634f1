#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "n2i/config.hpp"
#include "n2i/error.hpp"
#include "workbench.hpp"

namespace n2i {
namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](std::string_view name) -> std::optional<std::string> {
    auto it = vars.find(std::string(name));
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

TEST(Config, Defaults) {
  auto c = load_config(std::nullopt, env_of({}));
  EXPECT_EQ(c.store_dir, "store");
  EXPECT_EQ(c.resolved_index_path(), std::filesystem::path("store") / "default.index.json");
  EXPECT_EQ(c.pipeline, PipelineConfig{});
  EXPECT_EQ(c.embedding_kind, EmbeddingKind::hashing);
  EXPECT_EQ(c.deterministic_temperature, 0.0);
  EXPECT_EQ(c.generative_temperature, 0.9);
  EXPECT_EQ(make_embedder(c)->dimension(), 256u);
}

TEST(Config, SectionsAndRelativePaths) {
  auto j = nlohmann::json::parse(R"({
    "corpus": {"store_dir": "data/store", "name": "bags"},
    "index": {"M": 8, "seed": 7},
    "backends": {"chat": {"model": "m", "timeout_s": 2.5}, "embedding": {"kind": "http", "dimension": 768},
                 "max_retries": 4, "backoff_ms": 10},
    "thresholds": {"groundedness": 0.9},
    "pipeline": {"mode": "without_hall", "top_k": 5, "trace_dir": "/abs/traces", "prompt_dir": "p"}
  })");
  auto c = config_from_json(j, "/etc/n2i");
  EXPECT_EQ(c.store_dir, "/etc/n2i/data/store");
  EXPECT_EQ(c.corpus_name, "bags");
  EXPECT_EQ(c.resolved_index_path(), "/etc/n2i/data/store/bags.index.json");
  EXPECT_EQ(c.hnsw.M, 8u);
  EXPECT_EQ(c.hnsw.seed, 7u);
  EXPECT_EQ(c.chat.model, "m");
  EXPECT_EQ(c.chat.timeout.count(), 2500);
  EXPECT_EQ(c.embedding_kind, EmbeddingKind::http);
  EXPECT_EQ(c.embedding_dimension, 768u);
  EXPECT_EQ(c.retry.max_retries, 4);
  EXPECT_EQ(c.pipeline.thresholds.groundedness, 0.9);
  EXPECT_EQ(c.pipeline.thresholds.context, kDefaultContextThreshold);
  EXPECT_EQ(c.pipeline.mode, PipelineMode::without_hallucination_control);
  EXPECT_EQ(c.pipeline.top_k, 5u);
  EXPECT_EQ(c.trace_dir, "/abs/traces");
  EXPECT_EQ(c.prompt_dir, std::filesystem::path("/etc/n2i/p"));
}

TEST(Config, RoundTrip) {
  auto c = config_from_json(nlohmann::json::parse(R"({"pipeline": {"search_mode": "exact"}})"));
  auto j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
}

TEST(Config, Rejections) {
  auto bad = [](const char* text) { EXPECT_THROW(config_from_json(nlohmann::json::parse(text)), Error) << text; };
  bad(R"({"extra": {}})");
  bad(R"({"corpus": {"colour": "red"}})");
  bad(R"({"corpus": []})");
  bad(R"({"thresholds": {"context": 2}})");
  bad(R"({"pipeline": {"top_k": 0}})");
  bad(R"({"pipeline": {"mode": "turbo"}})");
  bad(R"({"backends": {"embedding": {"kind": "magic"}}})");
  bad(R"({"backends": {"embedding": {"dimension": 0}}})");
  bad(R"({"index": {"M": "many"}})");
}

TEST(Config, FileEnvAndOverrides) {
  testkit::TempDir dir;
  std::ofstream(dir / "n2i.json") << R"({"corpus": {"store_dir": "s"}})";
  auto c = load_config(std::nullopt, env_of({{"N2I_CONFIG", (dir / "n2i.json").string()},
                                             {"N2I_CHAT_MODEL", "llama"},
                                             {"N2I_EMBED_ENDPOINT", "http://h:1/e"}}));
  EXPECT_EQ(c.store_dir, dir / "s");
  EXPECT_EQ(c.chat.model, "llama");
  EXPECT_EQ(c.embedding.url, "http://h:1/e");
  EXPECT_EQ(c.embedding_kind, EmbeddingKind::http);
  EXPECT_THROW(load_config(dir / "missing.json", env_of({})), Error);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_THROW(load_config(dir / "broken.json", env_of({})), Error);
}

TEST(Config, AgentKitUsesConfiguredTemperatures) {
  AppConfig c;
  c.generative_temperature = 0.3;
  auto kit = make_agent_kit(c, std::make_shared<ScriptedBackend>());
  EXPECT_EQ(kit.describe_backends()["generative"]["temperature"], 0.3);
  EXPECT_NE(make_chat_backend(c)->describe().find("mistral-nemo"), std::string::npos);
}

}  // namespace
}  // namespace n2i
