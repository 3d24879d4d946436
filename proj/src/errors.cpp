#include "opproc/errors.hpp"

namespace opproc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyInterior: return "EmptyInterior";
    case ErrorCode::DomainBoundary: return "DomainBoundary";
    case ErrorCode::UnboundedAbove: return "UnboundedAbove";
    case ErrorCode::AllPathsRejected: return "AllPathsRejected";
    case ErrorCode::InvalidA: return "InvalidA";
    case ErrorCode::StepPositivityLoss: return "StepPositivityLoss";
    case ErrorCode::RegimeMismatch: return "RegimeMismatch";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace opproc
