#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rqna {

enum class ErrorCode {
  InvalidArgument,
  RowSumExceedsOne,
  NotInvertible,
  NoExternalArrivals,
  NonpositiveServiceRate,
  InvalidGenerator,
  EmptyLog,
  HorizonTooShort,
  Unstable,
  SingularSystem,
  NotATree,
  UnknownDistributionTag,
  ParseError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RowSumExceedsOne: return "RowSumExceedsOne";
    case ErrorCode::NotInvertible: return "NotInvertible";
    case ErrorCode::NoExternalArrivals: return "NoExternalArrivals";
    case ErrorCode::NonpositiveServiceRate: return "NonpositiveServiceRate";
    case ErrorCode::InvalidGenerator: return "InvalidGenerator";
    case ErrorCode::EmptyLog: return "EmptyLog";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NotATree: return "NotATree";
    case ErrorCode::UnknownDistributionTag: return "UnknownDistributionTag";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so that
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rqna
