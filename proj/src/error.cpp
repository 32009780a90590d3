#include "graphflow/error.hpp"

namespace graphflow {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kNonSymmetricWeights: return "NonSymmetricWeights";
    case ErrorCode::kNonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::kDuplicatePoint: return "DuplicatePoint";
    case ErrorCode::kNotApplicable: return "NotApplicable";
    case ErrorCode::kNonConvergent: return "NonConvergent";
    case ErrorCode::kNotUpwindAdmissible: return "NotUpwindAdmissible";
    case ErrorCode::kNotConcave: return "NotConcave";
    case ErrorCode::kNotPositive: return "NotPositive";
    case ErrorCode::kThresholdExceeded: return "ThresholdExceeded";
    case ErrorCode::kStepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::kNonAntisymmetric: return "NonAntisymmetric";
    case ErrorCode::kInfiniteAction: return "InfiniteAction";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kInfeasibleEndpoints: return "InfeasibleEndpoints";
    case ErrorCode::kMassMismatch: return "MassMismatch";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kSemanticError: return "SemanticError";
    case ErrorCode::kExpressionError: return "ExpressionError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(error_code_name(code)) + ": " + message);
}

}  // namespace graphflow
