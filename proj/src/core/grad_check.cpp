#include "grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dressswap {

namespace {

std::string location(const Tensor& t, std::size_t flat) {
  return "element " + std::to_string(flat) + " (index " +
         shape_to_string(t.unravel(flat)) + ")";
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, const Tensor& params,
                           const Tensor& analytic, double h) {
  require_shape(analytic.shape(), params.shape(), "grad_check analytic gradient");
  if (!(h > 0.0) || !std::isfinite(h)) {
    fail(ErrorCode::invalid_argument, "grad_check step must be positive and finite");
  }

  GradCheckResult result;
  Tensor probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(analytic[i])) {
      fail(ErrorCode::numeric, "non-finite analytic gradient at " + location(params, i));
    }
    const double original = probe[i];
    probe[i] = original + h;
    const double plus = f(probe);
    probe[i] = original - h;
    const double minus = f(probe);
    probe[i] = original;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      fail(ErrorCode::numeric,
           "non-finite function value while perturbing " + location(params, i));
    }
    const double numeric = (plus - minus) / (2.0 * h);
    const double denom = std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace dressswap
