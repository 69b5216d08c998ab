#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace convo {

enum class ErrorCode {
  kInvalidInput,
  kDegenerateView,
  kDegenerateConfiguration,
  kAmbiguousDecomposition,
  kNoCandidate,
  kGeneration,
  kIo,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid_input";
    case ErrorCode::kDegenerateView: return "degenerate_view";
    case ErrorCode::kDegenerateConfiguration: return "degenerate_configuration";
    case ErrorCode::kAmbiguousDecomposition: return "ambiguous_decomposition";
    case ErrorCode::kNoCandidate: return "no_candidate";
    case ErrorCode::kGeneration: return "generation";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

/// Single exception type for the library; `code()` is the machine-readable part.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::kInvalidInput, message);
}

}  // namespace convo
