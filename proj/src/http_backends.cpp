#include "n2i/http_backends.hpp"

#include "httplib.h"

#include <fmt/format.h>

#include "n2i/error.hpp"

namespace n2i {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("endpoint '{}' lacks a scheme", url));
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& payload) {
  auto [origin, path] = split_url(endpoint.url);
  httplib::Client client(origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  auto res = client.Post(path, payload.dump(), "application/json");
  if (!res) {
    auto err = res.error();
    const auto code = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                          ? ErrorCode::Timeout
                          : ErrorCode::BackendUnavailable;
    throw Error(code, fmt::format("{}: {}", endpoint.url, httplib::to_string(err)));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendUnavailable, fmt::format("{}: HTTP {}", endpoint.url, res->status));
  }
  auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded()) {
    throw Error(ErrorCode::BackendUnavailable, fmt::format("{}: response is not JSON", endpoint.url));
  }
  return body;
}

}  // namespace

std::optional<std::string> extract_chat_content(const nlohmann::json& body) {
  if (!body.is_object()) return std::nullopt;
  if (auto m = body.find("message"); m != body.end() && m->is_object()) {
    if (auto c = m->find("content"); c != m->end() && c->is_string()) return c->get<std::string>();
  }
  if (auto ch = body.find("choices"); ch != body.end() && ch->is_array() && !ch->empty()) {
    const auto& first = (*ch)[0];
    if (first.contains("message") && first["message"].contains("content") && first["message"]["content"].is_string()) {
      return first["message"]["content"].get<std::string>();
    }
    if (first.contains("text") && first["text"].is_string()) return first["text"].get<std::string>();
  }
  for (const char* key : {"response", "content"}) {
    if (auto it = body.find(key); it != body.end() && it->is_string()) return it->get<std::string>();
  }
  return std::nullopt;
}

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  split_url(endpoint_.url);
  if (endpoint_.timeout.count() <= 0) throw Error(ErrorCode::InvalidArgument, "timeout must be positive");
}

std::string HttpChatBackend::send(const CompletionRequest& request) const {
  nlohmann::json payload{{"model", endpoint_.model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
                         {"temperature", request.temperature},
                         {"stream", false}};
  auto body = post_json(endpoint_, payload);
  auto content = extract_chat_content(body);
  if (!content) {
    throw Error(ErrorCode::BackendUnavailable, fmt::format("{}: no completion text in response", endpoint_.url));
  }
  return *content;
}

std::string HttpChatBackend::describe() const { return fmt::format("http-chat({}, {})", endpoint_.url, endpoint_.model); }

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEndpoint endpoint, std::size_t dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {
  split_url(endpoint_.url);
  if (dimension_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

std::vector<std::vector<double>> HttpEmbeddingBackend::embed_texts(std::span<const std::string> texts) const {
  nlohmann::json payload{{"model", endpoint_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  auto body = post_json(endpoint_, payload);
  try {
    if (body.contains("embeddings")) return body["embeddings"].get<std::vector<std::vector<double>>>();
    if (body.contains("data")) {
      std::vector<std::vector<double>> out;
      for (const auto& d : body["data"]) out.push_back(d.at("embedding").get<std::vector<double>>());
      return out;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BackendUnavailable, fmt::format("{}: malformed embeddings: {}", endpoint_.url, e.what()));
  }
  throw Error(ErrorCode::BackendUnavailable, fmt::format("{}: response has no embeddings", endpoint_.url));
}

std::string HttpEmbeddingBackend::describe() const {
  return fmt::format("http-embed({}, {}, d={})", endpoint_.url, endpoint_.model, dimension_);
}

}  // namespace n2i
