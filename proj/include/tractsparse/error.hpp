#pragma once

#include <stdexcept>
#include <string>

namespace tractsparse {

enum class ErrorCode {
  EmptyTractogram,
  DegenerateStreamline,
  NonFiniteCoordinate,
  AllZeroDistances,
  EigenFailure,
  NoConvergence,
  MaxIterations,
  SingularPencil,
  SingularAfterRidge,
  ZeroDegreeRow,
  EmptyCluster,
  DegenerateAtom,
  SylvesterFailure,
  LengthMismatch,
  SingleCluster,
  AtlasVersionMismatch,
  MeasureMismatch,
  InvalidArgument,
  Io,
  Format,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyTractogram: return "EmptyTractogram";
    case ErrorCode::DegenerateStreamline: return "DegenerateStreamline";
    case ErrorCode::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorCode::AllZeroDistances: return "AllZeroDistances";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::SingularPencil: return "SingularPencil";
    case ErrorCode::SingularAfterRidge: return "SingularAfterRidge";
    case ErrorCode::ZeroDegreeRow: return "ZeroDegreeRow";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::DegenerateAtom: return "DegenerateAtom";
    case ErrorCode::SylvesterFailure: return "SylvesterFailure";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::AtlasVersionMismatch: return "AtlasVersionMismatch";
    case ErrorCode::MeasureMismatch: return "MeasureMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Numerical failures (as opposed to bad input data or IO).
inline bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::EigenFailure:
    case ErrorCode::NoConvergence:
    case ErrorCode::MaxIterations:
    case ErrorCode::SingularPencil:
    case ErrorCode::SingularAfterRidge:
    case ErrorCode::SylvesterFailure:
    case ErrorCode::DegenerateAtom:
      return true;
    default:
      return false;
  }
}

}  // namespace tractsparse
