#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace n2i::text {

/// Line endings become '\n', runs of spaces/tabs collapse to one space,
/// spaces touching a newline are dropped, and the result is trimmed.
std::string normalize_whitespace(std::string_view in);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool is_blank(std::string_view s);

/// Case-insensitive (ASCII) prefix test.
bool starts_with_icase(std::string_view s, std::string_view prefix);
bool contains_icase(std::string_view haystack, std::string_view needle);

/// Splits UTF-8 into code points, each returned as its byte sequence.
/// Invalid bytes are passed through as single-byte units.
std::vector<std::string_view> utf8_units(std::string_view s);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view data);

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace n2i::text
