#pragma once

#include <stdexcept>
#include <string>

namespace pibound {

/// Error categories surfaced by the library. The CLI maps every category to a
/// nonzero exit status and prints the message.
enum class ErrorCode {
  NonFiniteCost,
  NonFiniteInput,
  SizeOverflow,
  DimensionMismatch,
  NotSymmetric,
  IndefiniteInput,
  SingularSigma0,
  NonScalarSpec,
  UnsupportedCost,
  EtaNegative,
  InvalidGrid,
  EmptyGroup,
  GroupTooSmall,
  ZeroVariance,
  NonScalarOutcome,
  DegenerateVariance,
  MissingColumn,
  NonBinaryTreatment,
  NonNumericCell,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pibound
