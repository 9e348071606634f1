#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace n2i {

/// Agent prompt with {{placeholder}} slots. Files start with "#! key: value"
/// header lines (at least "version"); the rest is the template body.
struct PromptTemplate {
  std::string name;
  std::string version;
  std::string body;

  /// "<name>@<version>", recorded in traces.
  [[nodiscard]] std::string version_tag() const { return name + "@" + version; }

  /// Throws InvalidArgument if a placeholder used by the body has no value.
  [[nodiscard]] std::string render(const std::map<std::string, std::string>& values) const;

  static PromptTemplate parse(std::string name, std::string_view file_text);
};

class PromptLibrary {
 public:
  /// Templates compiled into the library from the repository's prompts/ folder.
  static PromptLibrary builtin();
  /// Builtins overridden by any <name>.txt found in `dir`.
  static PromptLibrary from_directory(const std::filesystem::path& dir);

  [[nodiscard]] const PromptTemplate& get(std::string_view name) const;
  [[nodiscard]] std::vector<std::string> names() const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

namespace detail {
const std::vector<std::pair<std::string, std::string>>& builtin_prompt_files();
}

}  // namespace n2i
