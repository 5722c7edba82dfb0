#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace subdisc {

enum class ErrorCode {
  DimensionMismatch,
  UnknownAttribute,
  UnknownValue,
  DuplicateId,
  EmptyId,
  NonFiniteComponent,
  NotSymmetric,
  NotPSD,
  TooFewRecords,
  EmptyList,
  DegenerateComponent,
  MissingAttribute,
  NoRecords,
  SchemaMismatch,
  NonBinaryAttribute,
  StratumTooSmall,
  EmptyLevel,
  InvalidSpec,
  InvalidArgument,
  ParseError,
  VersionMismatch,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::UnknownValue: return "UnknownValue";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyId: return "EmptyId";
    case ErrorCode::NonFiniteComponent: return "NonFiniteComponent";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::DegenerateComponent: return "DegenerateComponent";
    case ErrorCode::MissingAttribute: return "MissingAttribute";
    case ErrorCode::NoRecords: return "NoRecords";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::NonBinaryAttribute: return "NonBinaryAttribute";
    case ErrorCode::StratumTooSmall: return "StratumTooSmall";
    case ErrorCode::EmptyLevel: return "EmptyLevel";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
  }
  return "Unknown";
}

/// Every failure raised by the library. The message always starts with the
/// code name so CLI output is greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace subdisc
