#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace drnav {

enum class ErrorCode {
  kParse,
  kOrdering,
  kEmptyTrace,
  kInvalidValue,
  kOutOfRange,
  kNonMonotonicTime,
  kWarmupIncomplete,
  kInvalidWindow,
  kInsufficientData,
  kDegenerateDesign,
  kModelNotTrained,
  kUnknownBucket,
  kInfeasibleEvent,
  kAlignment,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `code()` lets callers and tests
/// branch on the failure class; `line()` is set for parse errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<std::size_t> line = {});

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace drnav
