#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "n2i/agents.hpp"
#include "n2i/http_backends.hpp"
#include "n2i/pipeline.hpp"
#include "n2i/vector_index.hpp"

namespace n2i {

enum class EmbeddingKind { hashing, http };

/// Settings of every subcommand. Relative paths in a config file are resolved
/// against the file's directory.
struct AppConfig {
  // corpus
  std::filesystem::path store_dir = "store";
  std::string corpus_name = "default";
  // index
  std::optional<std::filesystem::path> index_path;  // default: <store_dir>/<corpus_name>.index.json
  HnswParams hnsw;
  // backends
  HttpEndpoint chat{"http://localhost:11434/api/chat", "mistral-nemo"};
  EmbeddingKind embedding_kind = EmbeddingKind::hashing;
  HttpEndpoint embedding{"http://localhost:11434/api/embed", "nomic-embed-text"};
  std::size_t embedding_dimension = 256;
  double deterministic_temperature = 0.0;
  double generative_temperature = 0.9;
  RetryPolicy retry;
  // pipeline (thresholds included)
  PipelineConfig pipeline;
  std::filesystem::path trace_dir = "traces";
  std::optional<std::filesystem::path> prompt_dir;

  [[nodiscard]] std::filesystem::path resolved_index_path() const;
};

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;

std::optional<std::string> process_env(std::string_view name);

/// Sections: corpus, index, backends, thresholds, pipeline. Unknown sections
/// are rejected.
AppConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const AppConfig& config);

/// N2I_CHAT_ENDPOINT, N2I_CHAT_MODEL, N2I_EMBED_ENDPOINT, N2I_EMBED_MODEL.
/// Setting N2I_EMBED_ENDPOINT selects the HTTP embedder.
void apply_env_overrides(AppConfig& config, const EnvLookup& env);

/// Reads `path`, or the file named by N2I_CONFIG, or starts from defaults;
/// environment overrides are applied last.
AppConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env = process_env);

std::unique_ptr<EmbeddingBackend> make_embedder(const AppConfig& config);
std::shared_ptr<const ChatBackend> make_chat_backend(const AppConfig& config);
/// Prompts from config.prompt_dir over the built-ins.
AgentKit make_agent_kit(const AppConfig& config, std::shared_ptr<const ChatBackend> chat);

}  // namespace n2i
