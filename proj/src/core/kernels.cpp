#include "kernels.hpp"

#include <Eigen/Core>

#include <string>

namespace dressswap {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMatrix<T>>;

// Rows of `cols` are indexed by (channel, ky, kx); columns by output pixel.
template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t kh, std::size_t kw,
            std::size_t out_h, std::size_t out_w, const Conv2dGeometry& g,
            T* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto stride = static_cast<std::ptrdiff_t>(g.stride);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = image + c * height * width;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx, ++row) {
        T* dst = cols + row * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
          T* out_row = dst + oy * out_w;
          if (iy < 0 || iy >= h) {
            std::fill(out_row, out_row + out_w, T{0});
            continue;
          }
          const T* src_row = plane + iy * w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kx);
            out_row[ox] = (ix < 0 || ix >= w) ? T{0} : src_row[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patch columns back onto the image.
template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t kh, std::size_t kw,
            std::size_t out_h, std::size_t out_w, const Conv2dGeometry& g,
            T* image) {
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto stride = static_cast<std::ptrdiff_t>(g.stride);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = image + c * height * width;
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx, ++row) {
        const T* src = cols + row * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
          if (iy < 0 || iy >= h) continue;
          const T* col_row = src + oy * out_w;
          T* dst_row = plane + iy * w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox) * stride - pad + static_cast<std::ptrdiff_t>(kx);
            if (ix >= 0 && ix < w) dst_row[ix] += col_row[ox];
          }
        }
      }
    }
  }
}

struct ConvDims {
  std::size_t n, c, h, w, f, kh, kw, out_h, out_w;
};

template <typename T>
ConvDims check_conv(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                    const Conv2dGeometry& g) {
  if (input.rank() != 4) {
    fail(ErrorCode::shape_mismatch,
         "conv2d input must be rank 4 [N,C,H,W], got " +
             shape_to_string(input.shape()));
  }
  if (kernel.rank() != 4) {
    fail(ErrorCode::shape_mismatch,
         "conv2d kernel must be rank 4 [F,C,kh,kw], got " +
             shape_to_string(kernel.shape()));
  }
  if (g.stride == 0) fail(ErrorCode::invalid_argument, "conv2d stride must be >= 1");
  if (kernel.dim(1) != input.dim(1)) {
    fail(ErrorCode::shape_mismatch,
         "conv2d channel dimension: input has C=" + std::to_string(input.dim(1)) +
             " but kernel expects C=" + std::to_string(kernel.dim(1)));
  }
  ConvDims d{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
             kernel.dim(0), kernel.dim(2), kernel.dim(3), 0, 0};
  d.out_h = conv_output_extent(d.h, d.kh, g, "height");
  d.out_w = conv_output_extent(d.w, d.kw, g, "width");
  return d;
}

}  // namespace

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel,
                               const Conv2dGeometry& geometry,
                               const char* axis_name) {
  const std::size_t padded = extent + 2 * geometry.padding;
  if (kernel == 0 || kernel > padded) {
    fail(ErrorCode::shape_mismatch,
         std::string("conv2d kernel ") + axis_name + " " + std::to_string(kernel) +
             " does not fit padded input " + axis_name + " " + std::to_string(padded));
  }
  return (padded - kernel) / geometry.stride + 1;
}

template <typename T>
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  MutMap<T> out(c, M, N);
  const ConstMap<T> a_map(a, transpose_a ? K : M, transpose_a ? M : K);
  const ConstMap<T> b_map(b, transpose_b ? N : K, transpose_b ? K : N);
  if (!accumulate) out.setZero();
  if (transpose_a && transpose_b) {
    out.noalias() += a_map.transpose() * b_map.transpose();
  } else if (transpose_a) {
    out.noalias() += a_map.transpose() * b_map;
  } else if (transpose_b) {
    out.noalias() += a_map * b_map.transpose();
  } else {
    out.noalias() += a_map * b_map;
  }
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    fail(ErrorCode::shape_mismatch, "matmul expects rank-2 operands, got " +
                                        shape_to_string(a.shape()) + " and " +
                                        shape_to_string(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    fail(ErrorCode::shape_mismatch,
         "matmul inner dimension: left has " + std::to_string(a.dim(1)) +
             " columns, right has " + std::to_string(b.dim(0)) + " rows");
  }
  BasicTensor<T> out({a.dim(0), b.dim(1)});
  gemm(false, false, a.dim(0), b.dim(1), a.dim(1), a.raw(), b.raw(), out.raw(), false);
  return out;
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const BasicTensor<T>& kernel,
                              const BasicTensor<T>& bias,
                              const Conv2dGeometry& geometry,
                              std::optional<Conv2dCache<T>>* cache) {
  const ConvDims d = check_conv(input, kernel, geometry);
  require_shape(bias.shape(), {d.f}, "conv2d bias");

  const std::size_t patch = d.c * d.kh * d.kw;
  const std::size_t pixels = d.out_h * d.out_w;
  BasicTensor<T> out({d.n, d.f, d.out_h, d.out_w});
  std::vector<T> cols(patch * pixels);
  for (std::size_t img = 0; img < d.n; ++img) {
    im2col(input.raw() + img * d.c * d.h * d.w, d.c, d.h, d.w, d.kh, d.kw,
           d.out_h, d.out_w, geometry, cols.data());
    T* dst = out.raw() + img * d.f * pixels;
    for (std::size_t f = 0; f < d.f; ++f) {
      std::fill(dst + f * pixels, dst + (f + 1) * pixels, bias[f]);
    }
    gemm(false, false, d.f, pixels, patch, kernel.raw(), cols.data(), dst, true);
  }
  if (cache != nullptr) *cache = Conv2dCache<T>{input, kernel, geometry};
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const std::optional<Conv2dCache<T>>& cache,
                               const BasicTensor<T>& grad_out) {
  if (!cache) {
    fail(ErrorCode::state, "conv2d_backward called without a forward cache");
  }
  const auto& input = cache->input;
  const auto& kernel = cache->kernel;
  const ConvDims d = check_conv(input, kernel, cache->geometry);
  require_shape(grad_out.shape(), {d.n, d.f, d.out_h, d.out_w}, "conv2d grad_out");

  const std::size_t patch = d.c * d.kh * d.kw;
  const std::size_t pixels = d.out_h * d.out_w;
  Conv2dGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernel.shape()),
                       BasicTensor<T>({d.f})};
  std::vector<T> cols(patch * pixels);
  std::vector<T> grad_cols(patch * pixels);
  for (std::size_t img = 0; img < d.n; ++img) {
    const T* dy = grad_out.raw() + img * d.f * pixels;
    for (std::size_t f = 0; f < d.f; ++f) {
      T acc{0};
      for (std::size_t p = 0; p < pixels; ++p) acc += dy[f * pixels + p];
      grads.bias[f] += acc;
    }
    im2col(input.raw() + img * d.c * d.h * d.w, d.c, d.h, d.w, d.kh, d.kw,
           d.out_h, d.out_w, cache->geometry, cols.data());
    gemm(false, true, d.f, patch, pixels, dy, cols.data(), grads.kernel.raw(), true);
    gemm(true, false, patch, pixels, d.f, kernel.raw(), dy, grad_cols.data(), false);
    col2im(grad_cols.data(), d.c, d.h, d.w, d.kh, d.kw, d.out_h, d.out_w,
           cache->geometry, grads.input.raw() + img * d.c * d.h * d.w);
  }
  return grads;
}

#define DRESSSWAP_INSTANTIATE_KERNELS(T)                                          \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t,        \
                        const T*, const T*, T*, bool);                            \
  template BasicTensor<T> matmul<T>(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> conv2d_forward<T>(                                      \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,        \
      const Conv2dGeometry&, std::optional<Conv2dCache<T>>*);                     \
  template Conv2dGrads<T> conv2d_backward<T>(const std::optional<Conv2dCache<T>>&, \
                                             const BasicTensor<T>&);

DRESSSWAP_INSTANTIATE_KERNELS(float)
DRESSSWAP_INSTANTIATE_KERNELS(double)

#undef DRESSSWAP_INSTANTIATE_KERNELS

}  // namespace dressswap
