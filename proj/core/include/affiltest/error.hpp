#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affiltest {

enum class ErrorCode {
  kDegenerateSample,
  kOutOfRange,
  kEmptySample,
  kInvalidDensity,
  kInvalidArgument,
  kDimensionMismatch,
  kRankDeficient,
  kDegenerateCovariance,
  kSolverNonconvergence,
  kSolverInconsistency,
  kInternal,
  kFormat,
  kValidation,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library. The code lets
/// callers (the CLI in particular) map failures to exit statuses without
/// parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace affiltest
