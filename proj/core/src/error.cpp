#include "affiltest/error.hpp"

namespace affiltest {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateSample: return "degenerate-sample";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kEmptySample: return "empty-sample";
    case ErrorCode::kInvalidDensity: return "invalid-density";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kRankDeficient: return "rank-deficient";
    case ErrorCode::kDegenerateCovariance: return "degenerate-covariance";
    case ErrorCode::kSolverNonconvergence: return "solver-nonconvergence";
    case ErrorCode::kSolverInconsistency: return "solver-inconsistency";
    case ErrorCode::kInternal: return "internal";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace affiltest
