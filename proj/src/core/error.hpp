#pragma once

#include <stdexcept>
#include <string>

namespace dressswap {

enum class ErrorCode {
  invalid_argument = 1,
  shape_mismatch,
  io,
  format,
  numeric,
  state,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure raised by the core carries a category so the C boundary can
// map it to a stable integer code.
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

}  // namespace dressswap
