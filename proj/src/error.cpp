#include "dald/error.hpp"

namespace dald {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateBlockId: return "DuplicateBlockId";
    case ErrorCode::EmptyScope: return "EmptyScope";
    case ErrorCode::DanglingBlockRef: return "DanglingBlockRef";
    case ErrorCode::UnknownBlock: return "UnknownBlock";
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::NonpositivePenalty: return "NonpositivePenalty";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingCouplingValue: return "MissingCouplingValue";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::SingularNormal: return "SingularNormal";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DiagonalMismatch: return "DiagonalMismatch";
    case ErrorCode::CyclicPattern: return "CyclicPattern";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::ConstraintsPresent: return "ConstraintsPresent";
    case ErrorCode::InfeasibleBalance: return "InfeasibleBalance";
    case ErrorCode::BadPartition: return "BadPartition";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace dald
