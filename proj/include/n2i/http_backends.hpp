#pragma once

#include <chrono>
#include <string>

#include "n2i/embedding.hpp"
#include "n2i/llm.hpp"

namespace n2i {

struct HttpEndpoint {
  std::string url;  // e.g. http://localhost:11434/api/chat
  std::string model;
  std::chrono::milliseconds timeout{120000};
};

/// POSTs {model, messages: [{role, content}], temperature, stream: false}.
/// Accepts the reply shapes of common local servers: message.content,
/// choices[0].message.content, or a top-level response/content string.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpEndpoint endpoint);

  [[nodiscard]] std::string send(const CompletionRequest& request) const override;
  [[nodiscard]] std::string describe() const override;

 private:
  HttpEndpoint endpoint_;
};

/// POSTs {model, input: [texts]} and expects {embeddings: [[...], ...]}
/// (or the {data: [{embedding}]} variant).
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(HttpEndpoint endpoint, std::size_t dimension);

  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  [[nodiscard]] std::vector<std::vector<double>> embed_texts(std::span<const std::string> texts) const override;
  [[nodiscard]] std::string describe() const override;

 private:
  HttpEndpoint endpoint_;
  std::size_t dimension_;
};

/// Extracts the completion text from a chat-server response body, or
/// nullopt when no known shape matches.
std::optional<std::string> extract_chat_content(const nlohmann::json& body);

}  // namespace n2i
