// Independent reference implementations used only by tests. None of these
// share code paths with the library kernels they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "geometry.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace oracle {

using dressswap::Tensor;

inline Tensor random_tensor(dressswap::Shape shape, dressswap::Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
      c(i, j) = acc;
    }
  }
  return c;
}

// Direct cross-correlation with zero padding.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
                     std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor out({n, f, oh, ow});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = bias[o];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(xx * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd))
                  continue;
                acc += x(b, ch, iy, ix) * w(o, ch, i, j);
              }
          out(b, o, y, xx) = acc;
        }
  return out;
}

// PNPOLY-style even-odd ray cast toward +x.
inline bool point_in_polygon(const std::vector<dressswap::Point>& pts, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
    const auto& a = pts[i];
    const auto& b = pts[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

inline dressswap::PixelMask ray_cast_mask(const std::vector<dressswap::Point>& pts,
                                          std::size_t width, std::size_t height) {
  dressswap::PixelMask mask(width, height);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      mask.set(c, r, point_in_polygon(pts, c + 0.5, r + 0.5));
  return mask;
}

// Random convex polygon: sorted angles on an ellipse-ish radius profile.
inline std::vector<dressswap::Point> random_convex(dressswap::Rng& rng, std::size_t n,
                                                   double cx, double cy, double radius) {
  std::vector<double> angles(n);
  for (auto& a : angles) a = rng.uniform(-M_PI, M_PI);
  std::sort(angles.begin(), angles.end());
  std::vector<dressswap::Point> pts;
  for (double a : angles) pts.push_back({cx + radius * std::cos(a), cy + radius * std::sin(a)});
  return pts;
}

}  // namespace oracle
