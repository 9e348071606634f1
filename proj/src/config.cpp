#include "n2i/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "n2i/error.hpp"

namespace n2i {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void check_keys(const nlohmann::json& section, std::string_view name, std::initializer_list<std::string_view> keys) {
  if (!section.is_object()) throw Error(ErrorCode::InvalidArgument, fmt::format("config section '{}' must be an object", name));
  for (const auto& [key, value] : section.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown key '{}.{}' in config", name, key));
    }
  }
}

void read_endpoint(const nlohmann::json& j, std::string_view name, HttpEndpoint& e) {
  check_keys(j, name, {"url", "model", "timeout_s"});
  e.url = j.value("url", e.url);
  e.model = j.value("model", e.model);
  if (j.contains("timeout_s")) {
    e.timeout = std::chrono::milliseconds(static_cast<long long>(j.at("timeout_s").get<double>() * 1000.0));
  }
}

nlohmann::json endpoint_json(const HttpEndpoint& e) {
  return {{"url", e.url}, {"model", e.model}, {"timeout_s", static_cast<double>(e.timeout.count()) / 1000.0}};
}

}  // namespace

fs::path AppConfig::resolved_index_path() const {
  return index_path ? *index_path : store_dir / (corpus_name + ".index.json");
}

std::optional<std::string> process_env(std::string_view name) {
  const char* v = std::getenv(std::string(name).c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

AppConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  AppConfig c;
  check_keys(j, "config", {"corpus", "index", "backends", "thresholds", "pipeline"});
  try {
    if (j.contains("corpus")) {
      const auto& s = j["corpus"];
      check_keys(s, "corpus", {"store_dir", "name"});
      if (s.contains("store_dir")) c.store_dir = resolve(base_dir, s["store_dir"].get<std::string>());
      c.corpus_name = s.value("name", c.corpus_name);
    }
    if (j.contains("index")) {
      const auto& s = j["index"];
      check_keys(s, "index", {"path", "M", "ef_construction", "ef_search", "seed"});
      if (s.contains("path")) c.index_path = resolve(base_dir, s["path"].get<std::string>());
      c.hnsw.M = s.value("M", c.hnsw.M);
      c.hnsw.ef_construction = s.value("ef_construction", c.hnsw.ef_construction);
      c.hnsw.ef_search = s.value("ef_search", c.hnsw.ef_search);
      c.hnsw.seed = s.value("seed", c.hnsw.seed);
    }
    if (j.contains("backends")) {
      const auto& s = j["backends"];
      check_keys(s, "backends",
                 {"chat", "embedding", "deterministic_temperature", "generative_temperature", "max_retries",
                  "backoff_ms"});
      if (s.contains("chat")) read_endpoint(s["chat"], "backends.chat", c.chat);
      if (s.contains("embedding")) {
        auto e = s["embedding"];
        const std::string kind = e.value("kind", std::string("hashing"));
        if (kind == "hashing") {
          c.embedding_kind = EmbeddingKind::hashing;
        } else if (kind == "http") {
          c.embedding_kind = EmbeddingKind::http;
        } else {
          throw Error(ErrorCode::InvalidArgument, fmt::format("unknown embedding kind '{}'", kind));
        }
        c.embedding_dimension = e.value("dimension", c.embedding_dimension);
        e.erase("kind");
        e.erase("dimension");
        read_endpoint(e, "backends.embedding", c.embedding);
      }
      c.deterministic_temperature = s.value("deterministic_temperature", c.deterministic_temperature);
      c.generative_temperature = s.value("generative_temperature", c.generative_temperature);
      c.retry.max_retries = s.value("max_retries", c.retry.max_retries);
      if (s.contains("backoff_ms")) c.retry.backoff = std::chrono::milliseconds(s["backoff_ms"].get<long long>());
    }
    if (j.contains("thresholds")) {
      check_keys(j["thresholds"], "thresholds", {"context", "groundedness", "answer_relevance"});
      c.pipeline.thresholds = j["thresholds"].get<Thresholds>();
    }
    if (j.contains("pipeline")) {
      auto s = j["pipeline"];
      check_keys(s, "pipeline",
                 {"mode", "top_k", "max_loop_iterations", "baseline_distance_threshold", "search_mode", "trace_dir",
                  "prompt_dir"});
      if (s.contains("trace_dir")) c.trace_dir = resolve(base_dir, s["trace_dir"].get<std::string>());
      if (s.contains("prompt_dir")) c.prompt_dir = resolve(base_dir, s["prompt_dir"].get<std::string>());
      s.erase("trace_dir");
      s.erase("prompt_dir");
      const auto thresholds = c.pipeline.thresholds;
      from_json(s, c.pipeline);
      c.pipeline.thresholds = thresholds;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("bad config: {}", e.what()));
  }
  if (c.embedding_dimension == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
  c.pipeline.validate();
  return c;
}

nlohmann::json config_to_json(const AppConfig& c) {
  auto pipeline = nlohmann::json(c.pipeline);
  pipeline.erase("thresholds");
  pipeline["trace_dir"] = c.trace_dir.string();
  if (c.prompt_dir) pipeline["prompt_dir"] = c.prompt_dir->string();
  auto embedding = endpoint_json(c.embedding);
  embedding["kind"] = c.embedding_kind == EmbeddingKind::http ? "http" : "hashing";
  embedding["dimension"] = c.embedding_dimension;
  nlohmann::json index{{"M", c.hnsw.M},
                       {"ef_construction", c.hnsw.ef_construction},
                       {"ef_search", c.hnsw.ef_search},
                       {"seed", c.hnsw.seed},
                       {"path", c.resolved_index_path().string()}};
  return {{"corpus", {{"store_dir", c.store_dir.string()}, {"name", c.corpus_name}}},
          {"index", index},
          {"backends",
           {{"chat", endpoint_json(c.chat)},
            {"embedding", embedding},
            {"deterministic_temperature", c.deterministic_temperature},
            {"generative_temperature", c.generative_temperature},
            {"max_retries", c.retry.max_retries},
            {"backoff_ms", c.retry.backoff.count()}}},
          {"thresholds", c.pipeline.thresholds},
          {"pipeline", pipeline}};
}

void apply_env_overrides(AppConfig& config, const EnvLookup& env) {
  if (auto v = env("N2I_CHAT_ENDPOINT")) config.chat.url = *v;
  if (auto v = env("N2I_CHAT_MODEL")) config.chat.model = *v;
  if (auto v = env("N2I_EMBED_ENDPOINT")) {
    config.embedding.url = *v;
    config.embedding_kind = EmbeddingKind::http;
  }
  if (auto v = env("N2I_EMBED_MODEL")) config.embedding.model = *v;
}

AppConfig load_config(const std::optional<fs::path>& path, const EnvLookup& env) {
  std::optional<fs::path> file = path;
  if (!file) {
    if (auto v = env("N2I_CONFIG")) file = fs::path(*v);
  }
  AppConfig config;
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open config '{}'", file->string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, fmt::format("config '{}' is not JSON", file->string()));
    config = config_from_json(j, file->parent_path());
  }
  apply_env_overrides(config, env);
  return config;
}

std::unique_ptr<EmbeddingBackend> make_embedder(const AppConfig& config) {
  if (config.embedding_kind == EmbeddingKind::http) {
    return std::make_unique<HttpEmbeddingBackend>(config.embedding, config.embedding_dimension);
  }
  return std::make_unique<HashingEmbedder>(config.embedding_dimension);
}

std::shared_ptr<const ChatBackend> make_chat_backend(const AppConfig& config) {
  return std::make_shared<HttpChatBackend>(config.chat);
}

AgentKit make_agent_kit(const AppConfig& config, std::shared_ptr<const ChatBackend> chat) {
  auto prompts = config.prompt_dir ? PromptLibrary::from_directory(*config.prompt_dir) : PromptLibrary::builtin();
  AgentBinding deterministic{chat, config.deterministic_temperature, config.retry};
  AgentBinding generative{chat, config.generative_temperature, config.retry};
  return AgentKit(std::move(prompts), std::move(deterministic), std::move(generative));
}

}  // namespace n2i
