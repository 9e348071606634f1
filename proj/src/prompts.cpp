#include "n2i/prompts.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "n2i/error.hpp"
#include "n2i/text.hpp"

namespace n2i {

namespace {

constexpr std::array<std::string_view, 6> kPlaceholders{"query", "article_id", "body", "contexts", "answer",
                                                        "failure_context"};

template <typename Fn>
void for_each_placeholder(std::string_view body, Fn&& fn) {
  std::size_t pos = 0;
  while ((pos = body.find("{{", pos)) != std::string_view::npos) {
    auto close = body.find("}}", pos + 2);
    if (close == std::string_view::npos) break;
    fn(pos, close + 2, body.substr(pos + 2, close - pos - 2));
    pos = close + 2;
  }
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string name, std::string_view file_text) {
  PromptTemplate t;
  t.name = std::move(name);
  std::size_t pos = 0;
  while (file_text.substr(pos).starts_with("#!")) {
    auto nl = file_text.find('\n', pos);
    auto line = file_text.substr(pos + 2, (nl == std::string_view::npos ? file_text.size() : nl) - pos - 2);
    auto colon = line.find(':');
    if (colon != std::string_view::npos && text::trim(line.substr(0, colon)) == "version") {
      t.version = std::string(text::trim(line.substr(colon + 1)));
    }
    if (nl == std::string_view::npos) {
      pos = file_text.size();
      break;
    }
    pos = nl + 1;
  }
  if (t.version.empty()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("prompt '{}' has no '#! version:' header", t.name));
  }
  t.body = std::string(text::trim(file_text.substr(pos)));
  for_each_placeholder(t.body, [&](std::size_t, std::size_t, std::string_view key) {
    if (std::find(kPlaceholders.begin(), kPlaceholders.end(), key) == kPlaceholders.end()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("prompt '{}' uses unknown placeholder '{}'", t.name, key));
    }
  });
  return t;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  std::size_t last = 0;
  for_each_placeholder(body, [&](std::size_t begin, std::size_t end, std::string_view key) {
    auto it = values.find(std::string(key));
    if (it == values.end()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("prompt '{}' needs a value for '{}'", name, key));
    }
    out.append(body, last, begin - last);
    out += it->second;
    last = end;
  });
  out.append(body, last);
  return out;
}

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  for (const auto& [name, content] : detail::builtin_prompt_files()) {
    lib.templates_.insert_or_assign(name, PromptTemplate::parse(name, content));
  }
  return lib;
}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
  PromptLibrary lib = builtin();
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Io, fmt::format("prompt directory '{}' not found", dir.string()));
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::ostringstream ss;
    ss << in.rdbuf();
    auto name = entry.path().stem().string();
    lib.templates_.insert_or_assign(name, PromptTemplate::parse(name, ss.str()));
  }
  return lib;
}

const PromptTemplate& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(ErrorCode::InvalidArgument, fmt::format("no prompt template '{}'", name));
  return it->second;
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : templates_) out.push_back(name);
  return out;
}

}  // namespace n2i
