#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace logcave {

enum class ErrorCode {
  kOverflow,
  kDegenerateSupport,
  kDegenerateHull,
  kNonConvergence,
  kInvalidF0,
  kDisjointSupport,
  kWindowTooSmall,
  kDivergent,
  kInvalidParams,
  kUnknownKind,
  kEnvelopeViolation,
  kSNotInterior,
  kInvalidInput,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this exception; `code()` carries
// the machine-readable reason and `what()` a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOverflow: return "OVERFLOW";
    case ErrorCode::kDegenerateSupport: return "DEGENERATE_SUPPORT";
    case ErrorCode::kDegenerateHull: return "DEGENERATE_HULL";
    case ErrorCode::kNonConvergence: return "NON_CONVERGENCE";
    case ErrorCode::kInvalidF0: return "INVALID_F0";
    case ErrorCode::kDisjointSupport: return "DISJOINT_SUPPORT";
    case ErrorCode::kWindowTooSmall: return "WINDOW_TOO_SMALL";
    case ErrorCode::kDivergent: return "DIVERGENT";
    case ErrorCode::kInvalidParams: return "INVALID_PARAMS";
    case ErrorCode::kUnknownKind: return "UNKNOWN_KIND";
    case ErrorCode::kEnvelopeViolation: return "ENVELOPE_VIOLATION";
    case ErrorCode::kSNotInterior: return "S_NOT_INTERIOR";
    case ErrorCode::kInvalidInput: return "INVALID_INPUT";
  }
  return "UNKNOWN";
}

}  // namespace logcave
