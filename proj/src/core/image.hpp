#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tensor.hpp"

namespace dressswap {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Row-major interleaved 8-bit RGB.
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(std::size_t width, std::size_t height, Rgb fill = {});
  ImageRGB(std::size_t width, std::size_t height, std::vector<std::uint8_t> bytes);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  Rgb at(std::size_t x, std::size_t y) const {
    const std::uint8_t* p = &bytes_[3 * (y * width_ + x)];
    return {p[0], p[1], p[2]};
  }
  void set(std::size_t x, std::size_t y, Rgb c) {
    std::uint8_t* p = &bytes_[3 * (y * width_ + x)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> bytes_;
};

struct ImageSize {
  std::size_t width = 0;
  std::size_t height = 0;
};

// PNG or JPEG, detected from the file signature.
ImageRGB decode_image(const std::filesystem::path& path);

// Header-only read of the pixel dimensions.
ImageSize probe_image(const std::filesystem::path& path);

// Always writes PNG (8-bit RGB, no interlace).
void encode_png(const std::filesystem::path& path, const ImageRGB& image);

// Bytes to [0,1] in channel-planar [3,H,W] layout.
Tensor to_tensor(const ImageRGB& image);

// Clamps to [0,1] and rounds to the nearest byte.
ImageRGB from_tensor(const Tensor& tensor);

}  // namespace dressswap
