#include "pibound/errors.hpp"

namespace pibound {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteCost: return "NonFiniteCost";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::SizeOverflow: return "SizeOverflow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::IndefiniteInput: return "IndefiniteInput";
    case ErrorCode::SingularSigma0: return "SingularSigma0";
    case ErrorCode::NonScalarSpec: return "NonScalarSpec";
    case ErrorCode::UnsupportedCost: return "UnsupportedCost";
    case ErrorCode::EtaNegative: return "EtaNegative";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::NonScalarOutcome: return "NonScalarOutcome";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace pibound
