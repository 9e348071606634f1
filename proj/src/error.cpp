#include "n2i/error.hpp"

namespace n2i {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::DuplicateSourceId: return "DuplicateSourceId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::NoPassingContext: return "NoPassingContext";
    case ErrorCode::IndexMissing: return "IndexMissing";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      message_(message) {}

}  // namespace n2i
