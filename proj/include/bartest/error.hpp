#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bartest {

enum class ErrorCode {
  InvalidArgument,
  // tree validation / ingestion
  MissingRoot,
  OrphanCell,
  IndexOutOfRange,
  DepthTooLarge,
  DuplicateIndex,
  ParseError,
  Io,
  // numerics
  Singular,
  NotPositive,
  // estimation and tests
  DegenerateTypeProportion,
  DegenerateVariance,
  InsufficientData,
  SingularDesign,
  NearUnitRoot,
  // monte carlo
  TooManyDiscards,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingRoot: return "MissingRoot";
    case ErrorCode::OrphanCell: return "OrphanCell";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DepthTooLarge: return "DepthTooLarge";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::NotPositive: return "NotPositive";
    case ErrorCode::DegenerateTypeProportion: return "DegenerateTypeProportion";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NearUnitRoot: return "NearUnitRoot";
    case ErrorCode::TooManyDiscards: return "TooManyDiscards";
  }
  return "Unknown";
}

// True for failures caused by the data being statistically uninformative
// rather than malformed. The CLI maps these to exit code 2.
inline bool is_statistical(ErrorCode code) {
  switch (code) {
    case ErrorCode::Singular:
    case ErrorCode::NotPositive:
    case ErrorCode::DegenerateTypeProportion:
    case ErrorCode::DegenerateVariance:
    case ErrorCode::InsufficientData:
    case ErrorCode::SingularDesign:
    case ErrorCode::NearUnitRoot:
      return true;
    default:
      return false;
  }
}

// A single problem found while validating input. `detail` carries the cell
// index, line number, type or condition estimate depending on the code.
struct Violation {
  ErrorCode code;
  std::int64_t detail = 0;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::int64_t detail = 0)
      : std::runtime_error(what), code_(code), detail_(detail) {}

  Error(std::vector<Violation> violations, const std::string& what)
      : std::runtime_error(what),
        code_(violations.front().code),
        detail_(violations.front().detail),
        violations_(std::move(violations)) {}

  ErrorCode code() const noexcept { return code_; }
  std::int64_t detail() const noexcept { return detail_; }
  // Every violation found, first one mirrored by code()/detail().
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  ErrorCode code_;
  std::int64_t detail_;
  std::vector<Violation> violations_;
};

}  // namespace bartest
