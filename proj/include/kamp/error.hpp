#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kamp {

enum class ErrorCode {
  InvalidWindow,
  InvalidArgument,
  DegeneratePair,
  InsufficientPoints,
  IdenticalMarks,
  UnknownMark,
  GridMismatch,
  RadiusOutOfRange,
  RadiusNotOnGrid,
  InternalConsistency,
  TooLarge,
  InfeasibleAbundance,
  MissingColumn,
  ParseFailure,
  EmptySample,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidWindow: return "invalid_window";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::DegeneratePair: return "degenerate_pair";
    case ErrorCode::InsufficientPoints: return "insufficient_points";
    case ErrorCode::IdenticalMarks: return "identical_marks";
    case ErrorCode::UnknownMark: return "unknown_mark";
    case ErrorCode::GridMismatch: return "grid_mismatch";
    case ErrorCode::RadiusOutOfRange: return "radius_out_of_range";
    case ErrorCode::RadiusNotOnGrid: return "radius_not_on_grid";
    case ErrorCode::InternalConsistency: return "internal_consistency";
    case ErrorCode::TooLarge: return "too_large";
    case ErrorCode::InfeasibleAbundance: return "infeasible_abundance";
    case ErrorCode::MissingColumn: return "missing_column";
    case ErrorCode::ParseFailure: return "parse_failure";
    case ErrorCode::EmptySample: return "empty_sample";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

// Every library failure is reported through this type; code() is stable and
// machine-readable, what() carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kamp
