#include "tensor.hpp"

namespace dressswap {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

void require_shape(const Shape& actual, const Shape& expected,
                   const std::string& what) {
  if (actual == expected) return;
  std::string detail;
  if (actual.size() != expected.size()) {
    detail = "rank " + std::to_string(actual.size()) + " != " +
             std::to_string(expected.size());
  } else {
    for (std::size_t a = 0; a < actual.size(); ++a) {
      if (actual[a] != expected[a]) {
        detail = "dimension " + std::to_string(a) + " is " +
                 std::to_string(actual[a]) + ", expected " +
                 std::to_string(expected[a]);
        break;
      }
    }
  }
  fail(ErrorCode::shape_mismatch, what + ": shape " + shape_to_string(actual) +
                                      " vs " + shape_to_string(expected) +
                                      " (" + detail + ")");
}

}  // namespace dressswap
