#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"

namespace dressswap {

// Continuous image coordinates: origin top-left, y grows downward, pixel
// (row i, col j) covers [j, j+1) x [i, i+1).
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Polygon {
  std::vector<Point> points;
};

// Half-open integer rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  std::int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::int64_t width() const { return x1 - x0; }
  std::int64_t height() const { return y1 - y0; }
  std::int64_t area() const { return width() * height(); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(std::size_t width, std::size_t height)
      : width_(width), height_(height), bits_(width * height, 0) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool at(std::size_t x, std::size_t y) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t x, std::size_t y, bool value) { bits_[y * width_ + x] = value; }
  std::size_t popcount() const;

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Orders points by ascending atan2(y - cy, x - cx) about the centroid, which
// is screen-clockwise with y down. Ties in angle go nearest-first. The
// centroid is summed in a canonical order so the result does not depend on
// the input permutation.
Polygon clockwise_sort(const std::vector<Point>& points);

// Even-odd membership of each pixel center in the window `rect` (pixel (x,y)
// of the mask is image pixel (rect.x0 + x, rect.y0 + y)). Scanline fill.
PixelMask rasterize(const Polygon& polygon, const PixelRect& window);
PixelMask rasterize(const Polygon& polygon, std::size_t width, std::size_t height);

// floor/ceil bounds of the vertices, clipped to the image. May be empty.
PixelRect polygon_bounds(const Polygon& polygon, std::size_t width, std::size_t height);

struct MaskedCrop {
  ImageRGB image;
  PixelMask mask;
  PixelRect bbox;
};

MaskedCrop masked_crop(const ImageRGB& image, const Polygon& polygon);

// Centre-aligned sampling: src = (dst + 0.5) * (src_extent / dst_extent) - 0.5,
// clamped to the edges.
ImageRGB resize_bilinear(const ImageRGB& image, std::size_t width, std::size_t height);

// Planar [C,H,W] float variant (no rounding).
Tensor resize_bilinear(const Tensor& planes, std::size_t width, std::size_t height);

// Nearest neighbour on the same sampling grid.
PixelMask resize_nearest(const PixelMask& mask, std::size_t width, std::size_t height);

struct SwapResult {
  ImageRGB image;
  PixelRect source_bbox;
  PixelRect dest_bbox;
  std::size_t composited = 0;
};

// Crops the source garment polygon, rescales it to the destination polygon's
// bounding box and pastes it wherever the rescaled source mask is set.
SwapResult swap_garment(const ImageRGB& source, const std::vector<Point>& source_landmarks,
                        const ImageRGB& dest, const std::vector<Point>& dest_landmarks);

// Each point drawn as a 3x3 square, colour fixed per slot index.
ImageRGB overlay_landmarks(const ImageRGB& image, const std::vector<Point>& points);

// Landmark exchange document: {"landmarks": [[x,y],...], "order": "deepfashion-v1"}.
inline constexpr const char* kLandmarkOrder = "deepfashion-v1";

struct LandmarkDocument {
  std::vector<Point> landmarks;
  std::string order = kLandmarkOrder;
  // Optional extras written by detection.
  std::vector<Point> model_landmarks;
  std::size_t image_width = 0;
  std::size_t image_height = 0;
};

LandmarkDocument parse_landmark_json(const std::string& text);
std::string landmark_json(const LandmarkDocument& doc);
LandmarkDocument read_landmark_file(const std::filesystem::path& path);
void write_landmark_file(const std::filesystem::path& path, const LandmarkDocument& doc);

}  // namespace dressswap
