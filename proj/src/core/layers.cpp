#include "layers.hpp"

#include <cmath>
#include <string>

#include "kernels.hpp"

namespace dressswap {

namespace {

template <typename T>
void check_batchnorm(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                     const BasicTensor<T>& beta) {
  if (input.rank() != 4) {
    fail(ErrorCode::shape_mismatch, "batchnorm input must be rank 4 [N,C,H,W], got " +
                                        shape_to_string(input.shape()));
  }
  require_shape(gamma.shape(), {input.dim(1)}, "batchnorm gamma (channel count)");
  require_shape(beta.shape(), {input.dim(1)}, "batchnorm beta (channel count)");
}

}  // namespace

template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input,
                                 const BasicTensor<T>& gamma,
                                 const BasicTensor<T>& beta,
                                 BatchNormState<T> state, Mode mode, double eps,
                                 double momentum,
                                 std::optional<BatchNormCache<T>>* cache) {
  if (mode == Mode::infer) {
    return batchnorm_infer(input, gamma, beta, state.running_mean,
                           state.running_var, eps);
  }
  check_batchnorm(input, gamma, beta);
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  const std::size_t count = n * plane;
  if (count < 2) {
    fail(ErrorCode::invalid_argument,
         "batchnorm train mode needs at least 2 values per channel (N*H*W), got " +
             std::to_string(count));
  }
  require_shape(state.running_mean.shape(), {c}, "batchnorm running_mean");
  require_shape(state.running_var.shape(), {c}, "batchnorm running_var");

  BasicTensor<T> out(input.shape());
  BasicTensor<T> normalized(input.shape());
  std::vector<T> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t img = 0; img < n; ++img) {
      const T* x = input.raw() + (img * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) sum += x[p];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t img = 0; img < n; ++img) {
      const T* x = input.raw() + (img * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = x[p] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(count);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[ch] = static_cast<T>(istd);
    const double g = gamma[ch], b = beta[ch];
    for (std::size_t img = 0; img < n; ++img) {
      const std::size_t base = (img * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double xhat = (input[base + p] - mean) * istd;
        normalized[base + p] = static_cast<T>(xhat);
        out[base + p] = static_cast<T>(g * xhat + b);
      }
    }
    state.running_mean[ch] =
        static_cast<T>(momentum * state.running_mean[ch] + (1.0 - momentum) * mean);
    state.running_var[ch] =
        static_cast<T>(momentum * state.running_var[ch] + (1.0 - momentum) * var);
  }
  if (cache != nullptr) {
    *cache = BatchNormCache<T>{std::move(normalized), std::move(inv_std)};
  }
  return out;
}

template <typename T>
BasicTensor<T> batchnorm_infer(const BasicTensor<T>& input,
                               const BasicTensor<T>& gamma,
                               const BasicTensor<T>& beta,
                               const BasicTensor<T>& running_mean,
                               const BasicTensor<T>& running_var, double eps) {
  check_batchnorm(input, gamma, beta);
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  require_shape(running_mean.shape(), {c}, "batchnorm running_mean");
  require_shape(running_var.shape(), {c}, "batchnorm running_var");
  BasicTensor<T> out(input.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double istd = 1.0 / std::sqrt(static_cast<double>(running_var[ch]) + eps);
    const double scale = gamma[ch] * istd;
    const double shift = beta[ch] - running_mean[ch] * scale;
    for (std::size_t img = 0; img < n; ++img) {
      const std::size_t base = (img * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        out[base + p] = static_cast<T>(input[base + p] * scale + shift);
      }
    }
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const std::optional<BatchNormCache<T>>& cache,
                                     const BasicTensor<T>& gamma,
                                     const BasicTensor<T>& grad_out) {
  if (!cache) fail(ErrorCode::state, "batchnorm_backward called without a forward cache");
  const auto& xhat = cache->normalized;
  require_shape(grad_out.shape(), xhat.shape(), "batchnorm grad_out");
  const std::size_t n = xhat.dim(0), c = xhat.dim(1);
  const std::size_t plane = xhat.dim(2) * xhat.dim(3);
  require_shape(gamma.shape(), {c}, "batchnorm gamma");
  const double count = static_cast<double>(n * plane);

  BatchNormGrads<T> grads{BasicTensor<T>(xhat.shape()), BasicTensor<T>({c}),
                          BasicTensor<T>({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t img = 0; img < n; ++img) {
      const std::size_t base = (img * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        sum_dy += grad_out[base + p];
        sum_dy_xhat += static_cast<double>(grad_out[base + p]) * xhat[base + p];
      }
    }
    grads.gamma[ch] = static_cast<T>(sum_dy_xhat);
    grads.beta[ch] = static_cast<T>(sum_dy);
    const double k = gamma[ch] * static_cast<double>(cache->inv_std[ch]) / count;
    for (std::size_t img = 0; img < n; ++img) {
      const std::size_t base = (img * c + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        grads.input[base + p] = static_cast<T>(
            k * (count * grad_out[base + p] - sum_dy - xhat[base + p] * sum_dy_xhat));
      }
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& forward_output,
                             const BasicTensor<T>& grad_out) {
  require_shape(grad_out.shape(), forward_output.shape(), "relu grad_out");
  BasicTensor<T> grad = grad_out;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(forward_output[i] > T{0})) grad[i] = T{0};
  }
  return grad;
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const BasicTensor<T>& bias) {
  if (input.rank() != 2 || weight.rank() != 2) {
    fail(ErrorCode::shape_mismatch, "dense expects input [N,in] and weight [out,in], got " +
                                        shape_to_string(input.shape()) + " and " +
                                        shape_to_string(weight.shape()));
  }
  if (input.dim(1) != weight.dim(1)) {
    fail(ErrorCode::shape_mismatch, "dense input width " + std::to_string(input.dim(1)) +
                                        " does not match weight width " +
                                        std::to_string(weight.dim(1)));
  }
  const std::size_t n = input.dim(0), in = input.dim(1), out_w = weight.dim(0);
  require_shape(bias.shape(), {out_w}, "dense bias");
  BasicTensor<T> out({n, out_w});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(bias.raw(), bias.raw() + out_w, out.raw() + i * out_w);
  }
  gemm(false, true, n, out_w, in, input.raw(), weight.raw(), out.raw(), true);
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const BasicTensor<T>& grad_out) {
  const std::size_t n = input.dim(0), in = input.dim(1), out_w = weight.dim(0);
  require_shape(grad_out.shape(), {n, out_w}, "dense grad_out");
  DenseGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weight.shape()),
                      BasicTensor<T>({out_w})};
  gemm(false, false, n, in, out_w, grad_out.raw(), weight.raw(), grads.input.raw(), false);
  gemm(true, false, out_w, in, n, grad_out.raw(), input.raw(), grads.weight.raw(), false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out_w; ++o) grads.bias[o] += grad_out[i * out_w + o];
  }
  return grads;
}

template <typename T>
double mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require_shape(target.shape(), pred.shape(), "mse target");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

template <typename T>
BasicTensor<T> mse_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require_shape(target.shape(), pred.shape(), "mse target");
  BasicTensor<T> grad(pred.shape());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    grad[i] = static_cast<T>(scale * (static_cast<double>(pred[i]) - target[i]));
  }
  return grad;
}

#define DRESSSWAP_INSTANTIATE_LAYERS(T)                                                \
  template BasicTensor<T> batchnorm_forward<T>(                                        \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,             \
      BatchNormState<T>, Mode, double, double, std::optional<BatchNormCache<T>>*);     \
  template BasicTensor<T> batchnorm_infer<T>(const BasicTensor<T>&, const BasicTensor<T>&, \
                                             const BasicTensor<T>&, const BasicTensor<T>&, \
                                             const BasicTensor<T>&, double);           \
  template BatchNormGrads<T> batchnorm_backward<T>(                                    \
      const std::optional<BatchNormCache<T>>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> relu_forward<T>(const BasicTensor<T>&);                      \
  template BasicTensor<T> relu_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> dense_forward<T>(const BasicTensor<T>&, const BasicTensor<T>&, \
                                           const BasicTensor<T>&);                     \
  template DenseGrads<T> dense_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&, \
                                           const BasicTensor<T>&);                     \
  template double mse_loss<T>(const BasicTensor<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> mse_grad<T>(const BasicTensor<T>&, const BasicTensor<T>&);

DRESSSWAP_INSTANTIATE_LAYERS(float)
DRESSSWAP_INSTANTIATE_LAYERS(double)

#undef DRESSSWAP_INSTANTIATE_LAYERS

}  // namespace dressswap
