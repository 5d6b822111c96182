#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dald {

enum class ErrorCode {
  DuplicateBlockId,
  EmptyScope,
  DanglingBlockRef,
  UnknownBlock,
  InvalidBox,
  NonpositivePenalty,
  DimensionMismatch,
  MissingCouplingValue,
  NotApplicable,
  SingularNormal,
  NonFiniteValue,
  DiagonalMismatch,
  CyclicPattern,
  MultipleRoots,
  InvalidMatrix,
  ConstraintsPresent,
  InfeasibleBalance,
  BadPartition,
  Infeasible,
  InvalidConfig,
  ParseError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dald
