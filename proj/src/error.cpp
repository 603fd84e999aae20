#include "drnav/error.hpp"

#include <fmt/format.h>

namespace drnav {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kOrdering: return "ordering violation";
    case ErrorCode::kEmptyTrace: return "empty trace";
    case ErrorCode::kInvalidValue: return "invalid value";
    case ErrorCode::kOutOfRange: return "out of range";
    case ErrorCode::kNonMonotonicTime: return "non-monotonic timestamp";
    case ErrorCode::kWarmupIncomplete: return "warm-up incomplete";
    case ErrorCode::kInvalidWindow: return "invalid window";
    case ErrorCode::kInsufficientData: return "insufficient data";
    case ErrorCode::kDegenerateDesign: return "degenerate design";
    case ErrorCode::kModelNotTrained: return "model not trained";
    case ErrorCode::kUnknownBucket: return "unknown bucket";
    case ErrorCode::kInfeasibleEvent: return "infeasible event";
    case ErrorCode::kAlignment: return "alignment failure";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kIo: return "I/O error";
  }
  return "error";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message, std::optional<std::size_t> line) {
  if (line) return fmt::format("{} (line {}): {}", to_string(code), *line, message);
  return fmt::format("{}: {}", to_string(code), message);
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(decorate(code, message, line)), code_(code), line_(line) {}

}  // namespace drnav
