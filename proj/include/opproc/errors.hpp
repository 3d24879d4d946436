#pragma once

#include <stdexcept>
#include <string>

namespace opproc {

enum class ErrorCode {
  InvalidArgument,
  EmptyInterior,
  DomainBoundary,
  UnboundedAbove,
  AllPathsRejected,
  InvalidA,
  StepPositivityLoss,
  RegimeMismatch,
  UnknownTag,
  Config,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace opproc
