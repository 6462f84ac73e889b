#include "error.hpp"

namespace dressswap {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::io: return "io";
    case ErrorCode::format: return "format";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::state: return "state";
  }
  return "unknown";
}

}  // namespace dressswap
