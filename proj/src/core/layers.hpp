#pragma once

#include <optional>

#include "tensor.hpp"

namespace dressswap {

enum class Mode { train, infer };

inline constexpr double kBatchNormEps = 1e-5;
// Weight kept on the previous running statistic at each training step.
inline constexpr double kBatchNormMomentum = 0.9;

template <typename T>
struct BatchNormState {
  BasicTensor<T>& running_mean;
  BasicTensor<T>& running_var;
};

template <typename T>
struct BatchNormCache {
  BasicTensor<T> normalized;  // x-hat, same shape as the input
  std::vector<T> inv_std;     // per channel
};

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

// Per-channel normalization over (N,H,W) followed by gamma * x_hat + beta.
// Train mode uses biased batch statistics and folds them into the running
// buffers; infer mode reads the running buffers only.
template <typename T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input,
                                 const BasicTensor<T>& gamma,
                                 const BasicTensor<T>& beta,
                                 BatchNormState<T> state, Mode mode,
                                 double eps = kBatchNormEps,
                                 double momentum = kBatchNormMomentum,
                                 std::optional<BatchNormCache<T>>* cache = nullptr);

// Infer-mode overload with read-only running statistics.
template <typename T>
BasicTensor<T> batchnorm_infer(const BasicTensor<T>& input,
                               const BasicTensor<T>& gamma,
                               const BasicTensor<T>& beta,
                               const BasicTensor<T>& running_mean,
                               const BasicTensor<T>& running_var,
                               double eps = kBatchNormEps);

// Train-mode backward.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const std::optional<BatchNormCache<T>>& cache,
                                     const BasicTensor<T>& gamma,
                                     const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& forward_output,
                             const BasicTensor<T>& grad_out);

// y = x W^T + b with x [N,in], W [out,in], b [out].
template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const BasicTensor<T>& bias);

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                             const BasicTensor<T>& grad_out);

// Mean over every element of (pred - target)^2, accumulated in double.
template <typename T>
double mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

// 2 (pred - target) / element_count.
template <typename T>
BasicTensor<T> mse_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target);

}  // namespace dressswap
