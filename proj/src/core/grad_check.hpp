#pragma once

#include <cstddef>
#include <functional>

#include "tensor.hpp"

namespace dressswap {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;  // flat index into params
};

using ScalarFunction = std::function<double(const Tensor&)>;

// Compares `analytic` against central differences (f(x+h) - f(x-h)) / 2h,
// element by element. Relative error is |a - n| / max(1e-8, |a| + |n|).
// Any non-finite function value or gradient is rejected with its location.
GradCheckResult grad_check(const ScalarFunction& f, const Tensor& params,
                           const Tensor& analytic, double h = 1e-5);

}  // namespace dressswap
