#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace termstory {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kDuplicate,
  kOverflow,
  kParse,
  kShape,
  kNonFinite,
  kUnavailable,
  kIo,
  kCorrupt,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` classifies the failure so
/// callers such as the HTTP layer can map it to a status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace termstory
