#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace forge {

enum class ErrorKind {
  Io,
  Usage,
  UnknownColumn,
  MissingColumn,
  DuplicateColumn,
  TypeParseError,
  SchemaMismatch,
  DuplicateKey,
  EmptyTable,
  InvalidArgument,
  RuleColumnMissing,
  PlanSyntax,
  MalformedTimestamp,
  InsufficientData,
  ZeroVariance,
  DegenerateTable,
  DegenerateGroups,
  ZeroTotalVariance,
  ZeroEntropy,
  AllMissingTarget,
  NoObservedValues,
  ZeroCount,
  TooFewMembers,
  ShapeMismatch,
  LabelOutOfRange,
  VersionMismatch,
  ZeroMajority,
  EmptyData,
  InvalidAction,
  InsufficientMemory,
  LengthMismatch,
  EmptyInput,
  InvalidProportions,
  MissingValuesPresent,
  StageFailure,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::Usage: return "Usage";
    case ErrorKind::UnknownColumn: return "UnknownColumn";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::DuplicateColumn: return "DuplicateColumn";
    case ErrorKind::TypeParseError: return "TypeParseError";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::EmptyTable: return "EmptyTable";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::RuleColumnMissing: return "RuleColumnMissing";
    case ErrorKind::PlanSyntax: return "PlanSyntax";
    case ErrorKind::MalformedTimestamp: return "MalformedTimestamp";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::DegenerateTable: return "DegenerateTable";
    case ErrorKind::DegenerateGroups: return "DegenerateGroups";
    case ErrorKind::ZeroTotalVariance: return "ZeroTotalVariance";
    case ErrorKind::ZeroEntropy: return "ZeroEntropy";
    case ErrorKind::AllMissingTarget: return "AllMissingTarget";
    case ErrorKind::NoObservedValues: return "NoObservedValues";
    case ErrorKind::ZeroCount: return "ZeroCount";
    case ErrorKind::TooFewMembers: return "TooFewMembers";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::ZeroMajority: return "ZeroMajority";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::InvalidAction: return "InvalidAction";
    case ErrorKind::InsufficientMemory: return "InsufficientMemory";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidProportions: return "InvalidProportions";
    case ErrorKind::MissingValuesPresent: return "MissingValuesPresent";
    case ErrorKind::StageFailure: return "StageFailure";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception; `kind()` is the
/// stable, testable part, the message carries row/column locations.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace forge
