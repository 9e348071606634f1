#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "json.hpp"

namespace n2i {

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds backoff{200};  // doubled after each failed attempt
};

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.0;
};

/// Text-completion transport beneath every agent.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// One attempt. Transport failures throw BackendUnavailable or Timeout.
  [[nodiscard]] virtual std::string send(const CompletionRequest& request) const = 0;
  [[nodiscard]] virtual std::string describe() const = 0;
};

/// Sends with retries on transport failure (1 + max_retries attempts,
/// exponential backoff). A blank reply throws EmptyCompletion.
std::string complete(const ChatBackend& backend, const CompletionRequest& request, const RetryPolicy& retry);

/// Canonical key of a rendered prompt: SHA-256 of its UTF-8 bytes, hex.
std::string prompt_digest(std::string_view prompt);

/// Replays replies keyed by prompt digest. In strict mode an unknown prompt is
/// a BackendUnavailable error; lax mode echoes the prompt back.
class ScriptedBackend final : public ChatBackend {
 public:
  enum class Mode { strict, lax };

  explicit ScriptedBackend(Mode mode = Mode::strict) : mode_(mode) {}

  static ScriptedBackend from_json(const nlohmann::json& j, Mode mode = Mode::strict);
  static ScriptedBackend from_file(const std::filesystem::path& path, Mode mode = Mode::strict);

  void add(std::string_view prompt, std::string reply);
  void add_digest(std::string digest, std::string reply);
  [[nodiscard]] std::size_t size() const noexcept { return replies_.size(); }

  [[nodiscard]] std::string send(const CompletionRequest& request) const override;
  [[nodiscard]] std::string describe() const override;

 private:
  Mode mode_;
  std::map<std::string, std::string> replies_;
};

/// Forwards to another backend and remembers every (digest, reply) pair so a
/// live session can be replayed offline by ScriptedBackend.
class RecordingBackend final : public ChatBackend {
 public:
  explicit RecordingBackend(std::shared_ptr<const ChatBackend> inner) : inner_(std::move(inner)) {}

  [[nodiscard]] std::string send(const CompletionRequest& request) const override;
  [[nodiscard]] std::string describe() const override;

  /// {"format": "n2i-scripted", "version": 1, "replies": {digest: reply}}
  [[nodiscard]] nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::shared_ptr<const ChatBackend> inner_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::string> recorded_;
};

}  // namespace n2i
