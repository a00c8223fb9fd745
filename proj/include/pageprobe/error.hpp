#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pageprobe {

enum class ErrorCode {
  MalformedDocument,
  UnsupportedVersion,
  EmptySession,
  InvalidPolicy,
  WhoisUnavailable,
  ResolverFailure,
  AlignmentError,
  StoreCorrupt,
  StoreFailure,
  FilterError,
  DriverFailure,
  FormatMismatch,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pageprobe
