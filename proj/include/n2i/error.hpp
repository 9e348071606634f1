#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace n2i {

/// Typed failure categories surfaced across module boundaries.
enum class ErrorCode {
  InvalidArgument,
  Io,
  EmptyDocument,
  DuplicateSourceId,
  DimensionMismatch,
  ZeroVector,
  BackendUnavailable,
  Timeout,
  EmptyCompletion,
  NoPassingContext,
  IndexMissing,
  MalformedTrace,
  LengthMismatch,
  MissingGold,
  ParseFailure,
  SchemaViolation,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying an ErrorCode. what() is "<Code>: <message>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace n2i
