#include "n2i/llm.hpp"

#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "n2i/error.hpp"
#include "n2i/text.hpp"

namespace n2i {

std::string complete(const ChatBackend& backend, const CompletionRequest& request, const RetryPolicy& retry) {
  if (text::is_blank(request.prompt)) throw Error(ErrorCode::InvalidArgument, "prompt must be non-empty");
  const int attempts = 1 + std::max(0, retry.max_retries);
  auto delay = retry.backoff;
  for (int attempt = 1;; ++attempt) {
    std::string reply;
    try {
      reply = backend.send(request);
    } catch (const Error& e) {
      const bool transport = e.code() == ErrorCode::BackendUnavailable || e.code() == ErrorCode::Timeout;
      if (!transport) throw;
      if (attempt >= attempts) {
        throw Error(e.code(), fmt::format("{} (after {} attempts)", e.message(), attempts));
      }
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
      delay *= 2;
      continue;
    }
    if (text::is_blank(reply)) {
      throw Error(ErrorCode::EmptyCompletion, fmt::format("{} returned an empty completion", backend.describe()));
    }
    return reply;
  }
}

std::string prompt_digest(std::string_view prompt) { return text::sha256_hex(prompt); }

ScriptedBackend ScriptedBackend::from_json(const nlohmann::json& j, Mode mode) {
  if (!j.is_object() || !j.contains("replies") || !j["replies"].is_object()) {
    throw Error(ErrorCode::InvalidArgument, "scripted backend file needs a 'replies' object");
  }
  ScriptedBackend backend(mode);
  for (const auto& [digest, reply] : j["replies"].items()) {
    if (!reply.is_string()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("scripted reply for '{}' is not a string", digest));
    }
    backend.add_digest(digest, reply.get<std::string>());
  }
  return backend;
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path, Mode mode) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open scripted backend file '{}'", path.string()));
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, fmt::format("'{}' is not valid JSON", path.string()));
  return from_json(j, mode);
}

void ScriptedBackend::add(std::string_view prompt, std::string reply) {
  replies_[prompt_digest(prompt)] = std::move(reply);
}

void ScriptedBackend::add_digest(std::string digest, std::string reply) { replies_[std::move(digest)] = std::move(reply); }

std::string ScriptedBackend::send(const CompletionRequest& request) const {
  auto digest = prompt_digest(request.prompt);
  auto it = replies_.find(digest);
  if (it != replies_.end()) return it->second;
  if (mode_ == Mode::lax) return request.prompt;
  throw Error(ErrorCode::BackendUnavailable, fmt::format("no scripted reply for prompt digest {}", digest));
}

std::string ScriptedBackend::describe() const {
  return fmt::format("scripted({}, {} replies)", mode_ == Mode::strict ? "strict" : "lax", replies_.size());
}

std::string RecordingBackend::send(const CompletionRequest& request) const {
  std::string reply = inner_->send(request);
  std::lock_guard lock(mutex_);
  recorded_[prompt_digest(request.prompt)] = reply;
  return reply;
}

std::string RecordingBackend::describe() const { return "recording(" + inner_->describe() + ")"; }

nlohmann::json RecordingBackend::to_json() const {
  std::lock_guard lock(mutex_);
  nlohmann::json replies = nlohmann::json::object();
  for (const auto& [digest, reply] : recorded_) replies[digest] = reply;
  return {{"format", "n2i-scripted"}, {"version", 1}, {"replies", replies}};
}

void RecordingBackend::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out << to_json().dump(1) << '\n';
}

}  // namespace n2i
