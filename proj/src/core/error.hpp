#pragma once

#include <stdexcept>
#include <string>

namespace stereotrap {

enum class ErrorCode {
  kInvalidArgument = 1,
  kDimensionMismatch,
  kNonConvergence,
  kDegenerateGeometry,
  kDegenerateConfiguration,
  kInsufficientPoints,
  kOddWidth,
  kNoValidDepth,
  kEmptyBins,
  kEmptySequence,
  kLengthMismatch,
  kInvalidWindow,
  kIo,
  kParse,
};

const char* ErrorCodeName(ErrorCode code) noexcept;

// All failures in the core library are reported through this exception; the
// C API translates the code into an st_status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stereotrap
