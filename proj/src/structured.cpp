#include "n2i/structured.hpp"

#include <cmath>

#include <fmt/format.h>

namespace n2i {

namespace {

// End of the balanced object starting at `open`, honouring string literals.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::nullopt;
}

bool is_integral(const nlohmann::json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) return true;
  if (!v.is_number_float()) return false;
  double d = v.get<double>();
  return std::isfinite(d) && std::floor(d) == d;
}

std::optional<std::string> check_field(const nlohmann::json& v, const FieldSpec& spec) {
  switch (spec.type) {
    case FieldType::string:
      if (!v.is_string()) return "expected string";
      if (spec.non_empty && v.get<std::string>().find_first_not_of(" \t\r\n") == std::string::npos) {
        return "must be non-empty";
      }
      return std::nullopt;
    case FieldType::boolean:
      return v.is_boolean() ? std::nullopt : std::optional<std::string>("expected boolean");
    case FieldType::string_list:
      if (!v.is_array()) return "expected array of strings";
      for (const auto& e : v) {
        if (!e.is_string()) return "expected array of strings";
      }
      return std::nullopt;
    case FieldType::integer:
    case FieldType::number: {
      if (!v.is_number()) return "expected number";
      if (spec.type == FieldType::integer && !is_integral(v)) return "expected integer";
      double d = v.get<double>();
      if (!std::isfinite(d)) return "not finite";
      if ((spec.min && d < *spec.min) || (spec.max && d > *spec.max)) {
        return fmt::format("{} outside [{}, {}]", d, spec.min.value_or(-INFINITY), spec.max.value_or(INFINITY));
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string_view> find_json_object(std::string_view text) noexcept {
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    auto end = balanced_end(text, open);
    if (!end) continue;
    auto candidate = text.substr(open, *end - open);
    auto j = nlohmann::json::parse(candidate, nullptr, false);
    if (!j.is_discarded() && j.is_object()) return candidate;
  }
  return std::nullopt;
}

ParseResult parse_structured(std::string_view raw, const SchemaDescriptor& schema) noexcept {
  ParseResult result;
  try {
    result.raw = std::string(raw);
    auto span = find_json_object(raw);
    if (!span) {
      result.status = ParseStatus::parse_failure;
      result.message = fmt::format("no JSON object found for schema '{}'", schema.name);
      return result;
    }
    auto obj = nlohmann::json::parse(*span, nullptr, false);
    std::vector<std::string> problems;
    for (const auto& spec : schema.fields) {
      auto it = obj.find(spec.name);
      if (it == obj.end() || it->is_null()) {
        if (spec.required) {
          result.offending_keys.push_back(spec.name);
          problems.push_back(spec.name + ": missing");
        }
        continue;
      }
      if (auto why = check_field(*it, spec)) {
        result.offending_keys.push_back(spec.name);
        problems.push_back(spec.name + ": " + *why);
      }
    }
    if (!schema.allow_unknown_keys) {
      for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (const auto& spec : schema.fields) known = known || spec.name == key;
        if (!known) {
          result.offending_keys.push_back(key);
          problems.push_back(key + ": unknown key");
        }
      }
    }
    if (!problems.empty()) {
      result.status = ParseStatus::schema_violation;
      result.message = fmt::format("schema '{}' violated: {}", schema.name, fmt::join(problems, "; "));
      return result;
    }
    result.status = ParseStatus::ok;
    result.value = std::move(obj);
  } catch (const std::exception& e) {
    result.status = ParseStatus::parse_failure;
    result.message = e.what();
  }
  return result;
}

}  // namespace n2i
