#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace dressswap {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Dense row-major array. A rank-0 tensor holds exactly one element.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : data_(1, T{}) {}

  explicit BasicTensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_product(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents(shape_);
    if (data_.size() != shape_product(shape_)) {
      fail(ErrorCode::shape_mismatch,
           "tensor data length " + std::to_string(data_.size()) +
               " does not match shape " + shape_to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  template <typename... Idx>
  T& operator()(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  // Row-major flat offset with bounds checking.
  std::size_t offset(std::initializer_list<std::size_t> index) const {
    return offset(std::span<const std::size_t>(index.begin(), index.size()));
  }

  std::size_t offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) {
      fail(ErrorCode::shape_mismatch,
           "index rank " + std::to_string(index.size()) +
               " does not match tensor rank " + std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    for (std::size_t a = 0; a < shape_.size(); ++a) {
      if (index[a] >= shape_[a]) {
        fail(ErrorCode::invalid_argument,
             "index " + std::to_string(index[a]) + " out of range on axis " +
                 std::to_string(a) + " of extent " + std::to_string(shape_[a]));
      }
      flat = flat * shape_[a] + index[a];
    }
    return flat;
  }

  // Inverse of offset().
  std::vector<std::size_t> unravel(std::size_t flat) const {
    std::vector<std::size_t> index(shape_.size());
    for (std::size_t a = shape_.size(); a-- > 0;) {
      index[a] = flat % shape_[a];
      flat /= shape_[a];
    }
    return index;
  }

  BasicTensor reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), data_);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_extents(const Shape& shape) {
    for (std::size_t a = 0; a < shape.size(); ++a) {
      if (shape[a] == 0) {
        fail(ErrorCode::shape_mismatch,
             "zero extent on axis " + std::to_string(a) + " of shape " +
                 shape_to_string(shape));
      }
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

// Throws shape_mismatch naming `what` unless `actual == expected`.
void require_shape(const Shape& actual, const Shape& expected,
                   const std::string& what);

}  // namespace dressswap
