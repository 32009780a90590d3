#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace graphflow {

enum class ErrorCode {
  kSizeMismatch = 1,
  kNonSymmetricWeights,
  kNonPositiveWeight,
  kDuplicatePoint,
  kNotApplicable,
  kNonConvergent,
  kNotUpwindAdmissible,
  kNotConcave,
  kNotPositive,
  kThresholdExceeded,
  kStepSizeUnderflow,
  kNonAntisymmetric,
  kInfiniteAction,
  kNotConverged,
  kInfeasibleEndpoints,
  kMassMismatch,
  kSchemaError,
  kSemanticError,
  kExpressionError,
  kIoError,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the C
// layer can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace graphflow
