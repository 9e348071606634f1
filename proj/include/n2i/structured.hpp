#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace n2i {

enum class FieldType { string, number, integer, boolean, string_list };

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::string;
  bool required = true;
  std::optional<double> min;  // numeric range, inclusive
  std::optional<double> max;
  bool non_empty = false;  // strings only
};

struct SchemaDescriptor {
  std::string name;
  std::vector<FieldSpec> fields;
  bool allow_unknown_keys = true;
};

enum class ParseStatus { ok, parse_failure, schema_violation };

struct ParseResult {
  ParseStatus status = ParseStatus::parse_failure;
  nlohmann::json value;                     // the validated object when ok
  std::string message;                      // reason when not ok
  std::vector<std::string> offending_keys;  // schema violations
  std::string raw;                          // the input, kept for traces

  [[nodiscard]] bool ok() const noexcept { return status == ParseStatus::ok; }
};

/// Byte range of the first balanced {...} in `text` that parses as a JSON
/// object, skipping prose and code fences around it.
std::optional<std::string_view> find_json_object(std::string_view text) noexcept;

/// Extracts and validates. Never throws on malformed input.
ParseResult parse_structured(std::string_view raw, const SchemaDescriptor& schema) noexcept;

}  // namespace n2i
