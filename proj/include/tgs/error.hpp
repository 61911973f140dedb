#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tgs {

enum class ErrorCode : std::uint8_t {
  kInvalidEvent,
  kUnsortedLog,
  kParseError,
  kBackendIO,
  kCorruptRecord,
  kNotFound,
  kOutOfOrderBatch,
  kInfeasibleBalance,
  kOutOfSpan,
  kEmptySeries,
  kUnalignedOperands,
  kInconsistentDelta,
  kMemberFailure,
  kUnknownScript,
  kRefuseOverwrite,
  kInvalidConfig,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kParseError,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace tgs
