#pragma once

#include <cstddef>
#include <optional>

#include "tensor.hpp"

namespace dressswap {

// C = op(A) * op(B) (+ C when accumulate). Row-major, op(A) is m x k and
// op(B) is k x n. Backed by a blocked GEMM.
template <typename T>
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate);

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// floor((extent + 2*padding - kernel) / stride) + 1, rejecting kernels that
// do not fit the padded extent.
std::size_t conv_output_extent(std::size_t extent, std::size_t kernel,
                               const Conv2dGeometry& geometry,
                               const char* axis_name);

template <typename T>
struct Conv2dCache {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
  Conv2dGeometry geometry;
};

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

// Cross-correlation of input [N,C,H,W] with kernel [F,C,kh,kw] plus bias [F],
// zero padded. Lowered to patch-matrix extraction and one GEMM per image.
// When `cache` is non-null it receives what conv2d_backward needs.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const BasicTensor<T>& kernel,
                              const BasicTensor<T>& bias,
                              const Conv2dGeometry& geometry,
                              std::optional<Conv2dCache<T>>* cache = nullptr);

template <typename T>
Conv2dGrads<T> conv2d_backward(const std::optional<Conv2dCache<T>>& cache,
                               const BasicTensor<T>& grad_out);

}  // namespace dressswap
