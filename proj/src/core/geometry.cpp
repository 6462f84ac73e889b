#include "geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dressswap {

namespace {

void check_polygon(const Polygon& polygon) {
  if (polygon.points.size() < 3) {
    fail(ErrorCode::invalid_argument, "polygon needs at least 3 points, got " +
                                          std::to_string(polygon.points.size()));
  }
  for (std::size_t i = 0; i < polygon.points.size(); ++i) {
    const auto& p = polygon.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      fail(ErrorCode::numeric, "polygon vertex " + std::to_string(i) + " is not finite");
    }
  }
}

// Sorted crossing abscissae of the horizontal line at `y` with the polygon
// edges, using the half-open vertex rule (yi > y) != (yj > y).
void scanline_crossings(const std::vector<Point>& pts, double y, std::vector<double>& xs) {
  xs.clear();
  const std::size_t n = pts.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = pts[i];
    const Point& b = pts[j];
    if ((a.y > y) != (b.y > y)) {
      xs.push_back((b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x);
    }
  }
  std::sort(xs.begin(), xs.end());
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Resamples one plane of `src` (row-major, w x h) into `dst` (nw x nh).
void resize_plane(const double* src, std::size_t w, std::size_t h, double* dst,
                  std::size_t nw, std::size_t nh) {
  const double sx = static_cast<double>(w) / static_cast<double>(nw);
  const double sy = static_cast<double>(h) / static_cast<double>(nh);
  std::vector<std::size_t> x0(nw), x1(nw);
  std::vector<double> fx(nw);
  for (std::size_t x = 0; x < nw; ++x) {
    const double u = clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                           static_cast<double>(w - 1));
    x0[x] = static_cast<std::size_t>(std::floor(u));
    x1[x] = std::min(x0[x] + 1, w - 1);
    fx[x] = u - static_cast<double>(x0[x]);
  }
  for (std::size_t y = 0; y < nh; ++y) {
    const double v = clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                           static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(std::floor(v));
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = v - static_cast<double>(y0);
    const double* r0 = src + y0 * w;
    const double* r1 = src + y1 * w;
    for (std::size_t x = 0; x < nw; ++x) {
      const double top = r0[x0[x]] + (r0[x1[x]] - r0[x0[x]]) * fx[x];
      const double bottom = r1[x0[x]] + (r1[x1[x]] - r1[x0[x]]) * fx[x];
      dst[y * nw + x] = top + (bottom - top) * fy;
    }
  }
}

void check_resize(std::size_t w, std::size_t h, std::size_t nw, std::size_t nh) {
  if (w == 0 || h == 0) fail(ErrorCode::invalid_argument, "cannot resize an empty source");
  if (nw == 0 || nh == 0) {
    fail(ErrorCode::invalid_argument, "resize target must be at least 1x1, got " +
                                          std::to_string(nw) + "x" + std::to_string(nh));
  }
}

}  // namespace

std::size_t PixelMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Polygon clockwise_sort(const std::vector<Point>& points) {
  Polygon polygon{points};
  check_polygon(polygon);

  std::vector<Point> canonical = points;
  std::sort(canonical.begin(), canonical.end(),
            [](const Point& a, const Point& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  if (canonical.front() == canonical.back()) {
    fail(ErrorCode::invalid_argument, "all polygon points coincide");
  }
  double cx = 0.0, cy = 0.0;
  for (const auto& p : canonical) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(canonical.size());
  cy /= static_cast<double>(canonical.size());

  struct Keyed {
    double angle, dist;
    Point p;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(points.size());
  for (const auto& p : points) {
    const double dx = p.x - cx, dy = p.y - cy;
    keyed.push_back({std::atan2(dy, dx), dx * dx + dy * dy, p});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.angle != b.angle) return a.angle < b.angle;
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.p.x != b.p.x ? a.p.x < b.p.x : a.p.y < b.p.y;
  });
  for (std::size_t i = 0; i < keyed.size(); ++i) polygon.points[i] = keyed[i].p;
  return polygon;
}

PixelMask rasterize(const Polygon& polygon, const PixelRect& window) {
  check_polygon(polygon);
  if (window.empty()) {
    fail(ErrorCode::invalid_argument, "cannot rasterize into a zero-dimension raster");
  }
  const auto w = static_cast<std::size_t>(window.width());
  const auto h = static_cast<std::size_t>(window.height());
  PixelMask mask(w, h);
  std::vector<double> xs;
  for (std::size_t row = 0; row < h; ++row) {
    const double y = static_cast<double>(window.y0 + static_cast<std::int64_t>(row)) + 0.5;
    scanline_crossings(polygon.points, y, xs);
    // A centre cx is inside iff an odd number of crossings lie right of it,
    // i.e. cx falls in some [xs[2k], xs[2k+1]).
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const double left = xs[k], right = xs[k + 1];
      auto centre = [&](std::int64_t col) {
        return static_cast<double>(window.x0 + col) + 0.5;
      };
      std::int64_t col = static_cast<std::int64_t>(
          clamp(std::floor(left - 0.5 - static_cast<double>(window.x0)), -1.0,
                static_cast<double>(w)));
      col = std::max<std::int64_t>(col, 0);
      while (col < static_cast<std::int64_t>(w) && centre(col) < left) ++col;
      for (; col < static_cast<std::int64_t>(w) && centre(col) < right; ++col) {
        mask.set(static_cast<std::size_t>(col), row, true);
      }
    }
  }
  return mask;
}

PixelMask rasterize(const Polygon& polygon, std::size_t width, std::size_t height) {
  return rasterize(polygon, PixelRect{0, 0, static_cast<std::int64_t>(width),
                                      static_cast<std::int64_t>(height)});
}

PixelRect polygon_bounds(const Polygon& polygon, std::size_t width, std::size_t height) {
  check_polygon(polygon);
  double min_x = polygon.points[0].x, max_x = min_x;
  double min_y = polygon.points[0].y, max_y = min_y;
  for (const auto& p : polygon.points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  return PixelRect{static_cast<std::int64_t>(clamp(std::floor(min_x), 0.0, w)),
                   static_cast<std::int64_t>(clamp(std::floor(min_y), 0.0, h)),
                   static_cast<std::int64_t>(clamp(std::ceil(max_x), 0.0, w)),
                   static_cast<std::int64_t>(clamp(std::ceil(max_y), 0.0, h))};
}

MaskedCrop masked_crop(const ImageRGB& image, const Polygon& polygon) {
  const PixelRect bbox = polygon_bounds(polygon, image.width(), image.height());
  if (bbox.empty()) {
    fail(ErrorCode::invalid_argument, "polygon does not intersect the image bounds");
  }
  const auto w = static_cast<std::size_t>(bbox.width());
  const auto h = static_cast<std::size_t>(bbox.height());
  ImageRGB crop(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      crop.set(x, y, image.at(static_cast<std::size_t>(bbox.x0) + x,
                              static_cast<std::size_t>(bbox.y0) + y));
    }
  }
  return MaskedCrop{std::move(crop), rasterize(polygon, bbox), bbox};
}

ImageRGB resize_bilinear(const ImageRGB& image, std::size_t width, std::size_t height) {
  check_resize(image.width(), image.height(), width, height);
  const std::size_t w = image.width(), h = image.height();
  std::vector<double> plane(w * h), out(width * height);
  std::vector<std::uint8_t> bytes(3 * width * height);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < w * h; ++p) plane[p] = image.bytes()[3 * p + c];
    resize_plane(plane.data(), w, h, out.data(), width, height);
    for (std::size_t p = 0; p < width * height; ++p) {
      bytes[3 * p + c] = static_cast<std::uint8_t>(std::lround(clamp(out[p], 0.0, 255.0)));
    }
  }
  return ImageRGB(width, height, std::move(bytes));
}

Tensor resize_bilinear(const Tensor& planes, std::size_t width, std::size_t height) {
  if (planes.rank() != 3) {
    fail(ErrorCode::shape_mismatch, "planar resize expects [C,H,W], got " +
                                        shape_to_string(planes.shape()));
  }
  const std::size_t c = planes.dim(0), h = planes.dim(1), w = planes.dim(2);
  check_resize(w, h, width, height);
  Tensor out({c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch) {
    resize_plane(planes.raw() + ch * w * h, w, h, out.raw() + ch * width * height, width,
                 height);
  }
  return out;
}

PixelMask resize_nearest(const PixelMask& mask, std::size_t width, std::size_t height) {
  check_resize(mask.width(), mask.height(), width, height);
  const double sx = static_cast<double>(mask.width()) / static_cast<double>(width);
  const double sy = static_cast<double>(mask.height()) / static_cast<double>(height);
  PixelMask out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const auto src_y = std::min(
        mask.height() - 1,
        static_cast<std::size_t>(std::floor((static_cast<double>(y) + 0.5) * sy)));
    for (std::size_t x = 0; x < width; ++x) {
      const auto src_x = std::min(
          mask.width() - 1,
          static_cast<std::size_t>(std::floor((static_cast<double>(x) + 0.5) * sx)));
      out.set(x, y, mask.at(src_x, src_y));
    }
  }
  return out;
}

SwapResult swap_garment(const ImageRGB& source, const std::vector<Point>& source_landmarks,
                        const ImageRGB& dest, const std::vector<Point>& dest_landmarks) {
  for (const auto* set : {&source_landmarks, &dest_landmarks}) {
    if (set->size() != 8) {
      fail(ErrorCode::invalid_argument,
           "garment swap needs 8 landmarks per image, got " + std::to_string(set->size()));
    }
  }
  const Polygon src_poly = clockwise_sort(source_landmarks);
  const Polygon dst_poly = clockwise_sort(dest_landmarks);

  const MaskedCrop crop = masked_crop(source, src_poly);
  const PixelRect dst_box = polygon_bounds(dst_poly, dest.width(), dest.height());
  if (dst_box.empty()) {
    fail(ErrorCode::invalid_argument, "destination polygon is degenerate or outside the image");
  }
  const auto bw = static_cast<std::size_t>(dst_box.width());
  const auto bh = static_cast<std::size_t>(dst_box.height());
  const ImageRGB patch = resize_bilinear(crop.image, bw, bh);
  const PixelMask patch_mask = resize_nearest(crop.mask, bw, bh);

  SwapResult result{dest, crop.bbox, dst_box, 0};
  for (std::size_t y = 0; y < bh; ++y) {
    for (std::size_t x = 0; x < bw; ++x) {
      if (!patch_mask.at(x, y)) continue;
      result.image.set(static_cast<std::size_t>(dst_box.x0) + x,
                       static_cast<std::size_t>(dst_box.y0) + y, patch.at(x, y));
      ++result.composited;
    }
  }
  return result;
}

ImageRGB overlay_landmarks(const ImageRGB& image, const std::vector<Point>& points) {
  static constexpr std::array<Rgb, 8> kPalette{{{230, 25, 75},
                                                {60, 180, 75},
                                                {255, 225, 25},
                                                {0, 130, 200},
                                                {245, 130, 48},
                                                {145, 30, 180},
                                                {70, 240, 240},
                                                {240, 50, 230}}};
  ImageRGB out = image;
  const auto w = static_cast<std::int64_t>(image.width());
  const auto h = static_cast<std::int64_t>(image.height());
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!std::isfinite(points[k].x) || !std::isfinite(points[k].y)) continue;
    const auto cx = static_cast<std::int64_t>(std::floor(points[k].x));
    const auto cy = static_cast<std::int64_t>(std::floor(points[k].y));
    for (std::int64_t y = cy - 1; y <= cy + 1; ++y) {
      for (std::int64_t x = cx - 1; x <= cx + 1; ++x) {
        if (x < 0 || y < 0 || x >= w || y >= h) continue;
        out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                kPalette[k % kPalette.size()]);
      }
    }
  }
  return out;
}

LandmarkDocument parse_landmark_json(const std::string& text) {
  LandmarkDocument doc;
  auto read_points = [](const nlohmann::json& arr, const char* key) {
    std::vector<Point> pts;
    if (!arr.is_array()) fail(ErrorCode::format, std::string("'") + key + "' must be an array");
    for (const auto& item : arr) {
      if (!item.is_array() || item.size() < 2 || !item[0].is_number() || !item[1].is_number()) {
        fail(ErrorCode::format, std::string("each entry of '") + key + "' must be [x, y]");
      }
      pts.push_back({item[0].get<double>(), item[1].get<double>()});
    }
    return pts;
  };
  try {
    const auto root = nlohmann::json::parse(text);
    doc.landmarks = read_points(root.at("landmarks"), "landmarks");
    if (root.contains("order")) doc.order = root.at("order").get<std::string>();
    if (root.contains("model_landmarks")) {
      doc.model_landmarks = read_points(root.at("model_landmarks"), "model_landmarks");
    }
    if (root.contains("width")) doc.image_width = root.at("width").get<std::size_t>();
    if (root.contains("height")) doc.image_height = root.at("height").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("malformed landmark JSON: ") + e.what());
  }
  if (doc.order != kLandmarkOrder) {
    fail(ErrorCode::format, "unsupported landmark order '" + doc.order + "', expected " +
                                kLandmarkOrder);
  }
  if (doc.landmarks.size() != 8) {
    fail(ErrorCode::format,
         "expected 8 landmarks, got " + std::to_string(doc.landmarks.size()));
  }
  for (const auto& p : doc.landmarks) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      fail(ErrorCode::format, "landmark coordinates must be finite");
    }
  }
  return doc;
}

std::string landmark_json(const LandmarkDocument& doc) {
  auto to_json = [](const std::vector<Point>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts) arr.push_back({p.x, p.y});
    return arr;
  };
  nlohmann::ordered_json root;
  root["landmarks"] = to_json(doc.landmarks);
  root["order"] = doc.order;
  if (!doc.model_landmarks.empty()) root["model_landmarks"] = to_json(doc.model_landmarks);
  if (doc.image_width != 0) root["width"] = doc.image_width;
  if (doc.image_height != 0) root["height"] = doc.image_height;
  return root.dump(2) + "\n";
}

LandmarkDocument read_landmark_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open landmark file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_landmark_json(ss.str());
}

void write_landmark_file(const std::filesystem::path& path, const LandmarkDocument& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write landmark file " + path.string());
  out << landmark_json(doc);
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace dressswap
