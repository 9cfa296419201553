#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tracklab {

enum class ErrorCode {
  invalid_argument,
  validation,
  not_found,
  conflict,
  unauthenticated,
  undefined_direction,
  storage,
  internal,
};

std::string_view to_string(ErrorCode code);

/// Error raised by every tracklab module. The code survives all the way to
/// the HTTP layer, which maps it to a status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tracklab
