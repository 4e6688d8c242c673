#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtbias {

enum class ErrorCode {
  ParseError,
  DuplicateNode,
  UnknownNode,
  CycleDetected,
  TemporalOrderViolation,
  RoleFlavorMismatch,
  OutcomeCount,
  DegenerateDesign,
  AllOneClass,
  MissingRegressor,
  InvalidConfig,
  UnknownScenario,
  EmptyWeights,
  EmptyArm,
  NonMonotoneTimes,
  MissingColumn,
  DuplicateOccasion,
  NonBinaryTreatment,
  InvalidValue,
  UnsupportedData,
  InapplicableTarget,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateNode: return "DuplicateNode";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::TemporalOrderViolation: return "TemporalOrderViolation";
    case ErrorCode::RoleFlavorMismatch: return "RoleFlavorMismatch";
    case ErrorCode::OutcomeCount: return "OutcomeCount";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::AllOneClass: return "AllOneClass";
    case ErrorCode::MissingRegressor: return "MissingRegressor";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::EmptyWeights: return "EmptyWeights";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::NonMonotoneTimes: return "NonMonotoneTimes";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::DuplicateOccasion: return "DuplicateOccasion";
    case ErrorCode::NonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::UnsupportedData: return "UnsupportedData";
    case ErrorCode::InapplicableTarget: return "InapplicableTarget";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace mtbias
