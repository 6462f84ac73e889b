#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "geometry.hpp"
#include "oracles.hpp"

using namespace dressswap;

namespace {

double cross(const Point& a, const Point& b, const Point& c) {
  const double ux = b.x - a.x, uy = b.y - a.y;
  const double vx = c.x - b.x, vy = c.y - b.y;
  return ux * vy - uy * vx;
}

// Eight landmarks tracing an axis-aligned rectangle: corners plus edge midpoints.
std::vector<Point> rect_landmarks(double x0, double y0, double x1, double y1) {
  const double mx = 0.5 * (x0 + x1), my = 0.5 * (y0 + y1);
  return {{x0, y0}, {mx, y0}, {x1, y0}, {x1, my}, {x1, y1}, {mx, y1}, {x0, y1}, {x0, my}};
}

ImageRGB noise_image(std::size_t w, std::size_t h, Rng& rng) {
  ImageRGB img(w, h);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

}  // namespace

TEST_SUITE("geometry_swap") {
  TEST_CASE("clockwise_sort orders the square") {
    const Polygon p = clockwise_sort({{0, 0}, {10, 10}, {10, 0}, {0, 10}});
    CHECK(p.points == std::vector<Point>{{0, 0}, {10, 0}, {10, 10}, {0, 10}});
  }

  TEST_CASE("clockwise_sort keeps an already sorted polygon") {
    const std::vector<Point> sorted{{0, 0}, {10, 0}, {10, 10}, {0, 10}};
    CHECK(clockwise_sort(sorted).points == sorted);
  }

  TEST_CASE("clockwise_sort rejects degenerate input") {
    CHECK_THROWS_AS(clockwise_sort({{0, 0}, {1, 1}}), Error);
    CHECK_THROWS_AS(clockwise_sort({{2, 2}, {2, 2}, {2, 2}}), Error);
    CHECK_THROWS_AS(clockwise_sort({{0, 0}, {1, NAN}, {2, 2}}), Error);
  }

  TEST_CASE("clockwise_sort on random convex sets") {
    Rng rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
      auto pts = oracle::random_convex(rng, 3 + rng.below(10), rng.uniform(-50, 50),
                                       rng.uniform(-50, 50), rng.uniform(1, 100));
      rng.shuffle(pts);
      const Polygon sorted = clockwise_sort(pts);
      const std::size_t n = sorted.points.size();
      REQUIRE(n == pts.size());
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(cross(sorted.points[i], sorted.points[(i + 1) % n], sorted.points[(i + 2) % n]) >=
              0.0);
      }
      auto lhs = sorted.points, rhs = pts;
      const auto lex = [](const Point& a, const Point& b) {
        return std::tie(a.x, a.y) < std::tie(b.x, b.y);
      };
      std::sort(lhs.begin(), lhs.end(), lex);
      std::sort(rhs.begin(), rhs.end(), lex);
      CHECK(lhs == rhs);
      rng.shuffle(pts);
      CHECK(clockwise_sort(pts).points == sorted.points);
    }
  }

  TEST_CASE("rectangle covers sixteen pixel centres") {
    const PixelMask m = rasterize(Polygon{{{2, 2}, {6, 2}, {6, 6}, {2, 6}}}, 10, 10);
    CHECK(m.popcount() == 16);
    for (std::size_t y = 0; y < 10; ++y)
      for (std::size_t x = 0; x < 10; ++x)
        CHECK(m.at(x, y) == (x >= 2 && x < 6 && y >= 2 && y < 6));
  }

  TEST_CASE("polygon outside the raster is empty") {
    CHECK(rasterize(Polygon{{{20, 20}, {30, 20}, {25, 30}}}, 10, 10).popcount() == 0);
    CHECK(rasterize(Polygon{{{-9, -9}, {-1, -9}, {-5, -1}}}, 10, 10).popcount() == 0);
  }

  TEST_CASE("zero-dimension raster is rejected") {
    CHECK_THROWS_AS(rasterize(Polygon{{{0, 0}, {1, 0}, {0, 1}}}, 0, 5), Error);
  }

  TEST_CASE("scanline fill equals the ray-cast oracle") {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t w = 8 + rng.below(40), h = 8 + rng.below(40);
      std::vector<Point> pts(3 + rng.below(10));
      if (trial % 2 == 0) {
        // Star-shaped, hence simple.
        std::vector<double> angles(pts.size());
        for (auto& a : angles) a = rng.uniform(-M_PI, M_PI);
        std::sort(angles.begin(), angles.end());
        const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double r = rng.uniform(1, 0.7 * std::max(w, h));
          pts[i] = {cx + r * std::cos(angles[i]), cy + r * std::sin(angles[i])};
        }
      } else {
        // Arbitrary vertex soup, including half-integer centre hits.
        for (auto& p : pts) {
          p = {rng.uniform(-5, w + 5), rng.uniform(-5, h + 5)};
          if (rng.below(4) == 0) p.y = std::floor(p.y) + 0.5;
        }
      }
      CHECK(rasterize(Polygon{pts}, w, h) == oracle::ray_cast_mask(pts, w, h));
    }
  }

  TEST_CASE("integer shifts move the mask by the same amount") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Point> pts(3 + rng.below(6));
      // Dyadic coordinates keep the shifted arithmetic exact.
      for (auto& p : pts) p = {std::round(rng.uniform(2, 18) * 8) / 8, std::round(rng.uniform(2, 18) * 8) / 8};
      const auto dx = static_cast<std::int64_t>(rng.below(10));
      const auto dy = static_cast<std::int64_t>(rng.below(10));
      auto moved = pts;
      for (auto& p : moved) p = {p.x + dx, p.y + dy};
      const PixelMask a = rasterize(Polygon{pts}, 20, 20);
      const PixelMask b = rasterize(Polygon{moved}, 30, 30);
      CHECK(a.popcount() == b.popcount());
      for (std::size_t y = 0; y < 20; ++y)
        for (std::size_t x = 0; x < 20; ++x)
          CHECK(a.at(x, y) == b.at(x + static_cast<std::size_t>(dx), y + static_cast<std::size_t>(dy)));
    }
  }

  TEST_CASE("window rasterization matches the full raster") {
    const Polygon tri{{{1.5, 2.0}, {14.2, 5.1}, {6.0, 13.7}}};
    const PixelMask full = rasterize(tri, 16, 16);
    const PixelMask part = rasterize(tri, PixelRect{3, 4, 12, 15});
    for (std::size_t y = 0; y < 11; ++y)
      for (std::size_t x = 0; x < 9; ++x) CHECK(part.at(x, y) == full.at(x + 3, y + 4));
  }

  TEST_CASE("masked_crop cases") {
    Rng rng(24);
    const ImageRGB img = noise_image(12, 9, rng);

    SUBCASE("full frame") {
      const MaskedCrop c = masked_crop(img, Polygon{{{0, 0}, {12, 0}, {12, 9}, {0, 9}}});
      CHECK(c.image == img);
      CHECK(c.mask.popcount() == 12 * 9);
      CHECK(c.bbox == PixelRect{0, 0, 12, 9});
    }
    SUBCASE("corner triangle") {
      const Polygon tri{{{0, 0}, {5.5, 0}, {0, 4.2}}};
      const MaskedCrop c = masked_crop(img, tri);
      CHECK(c.bbox == PixelRect{0, 0, 6, 5});
      CHECK(c.mask.popcount() == rasterize(tri, 12, 9).popcount());
      for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 6; ++x) CHECK(c.image.at(x, y) == img.at(x, y));
    }
    SUBCASE("vertex outside is clipped") {
      const MaskedCrop c = masked_crop(img, Polygon{{{-4, 2}, {8, 1}, {20, 30}}});
      CHECK(c.bbox == PixelRect{0, 1, 12, 9});
    }
    SUBCASE("no overlap is rejected") {
      CHECK_THROWS_AS(masked_crop(img, Polygon{{{40, 40}, {50, 40}, {45, 50}}}), Error);
    }
  }

  TEST_CASE("bilinear resize of the 2x2 gradient") {
    ImageRGB img(2, 2);
    const std::uint8_t src[2][2] = {{0, 100}, {100, 200}};
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) img.set(x, y, {src[y][x], src[y][x], src[y][x]});
    const ImageRGB out = resize_bilinear(img, 4, 4);
    const int expected[4][4] = {
        {0, 25, 75, 100}, {25, 50, 100, 125}, {75, 100, 150, 175}, {100, 125, 175, 200}};
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        CHECK(out.at(x, y).r == expected[y][x]);
        CHECK(out.at(x, y).b == expected[y][x]);
      }
  }

  TEST_CASE("resize identities") {
    Rng rng(25);
    const ImageRGB img = noise_image(7, 5, rng);
    CHECK(resize_bilinear(img, 7, 5) == img);
    const ImageRGB flat(3, 4, Rgb{17, 99, 240});
    CHECK(resize_bilinear(flat, 11, 2) == ImageRGB(11, 2, Rgb{17, 99, 240}));

    PixelMask m(5, 3);
    m.set(1, 1, true);
    m.set(4, 2, true);
    CHECK(resize_nearest(m, 5, 3) == m);
    const PixelMask up = resize_nearest(m, 10, 6);
    CHECK(up.popcount() == 8);
    CHECK(up.at(2, 2));
    CHECK(up.at(9, 5));

    CHECK_THROWS_AS(resize_bilinear(img, 0, 3), Error);
  }

  TEST_CASE("planar tensor resize agrees with the byte path up to rounding") {
    Rng rng(26);
    const ImageRGB img = noise_image(9, 6, rng);
    const ImageRGB via_planes = from_tensor(resize_bilinear(to_tensor(img), 4, 13));
    const ImageRGB direct = resize_bilinear(img, 4, 13);
    for (std::size_t i = 0; i < direct.bytes().size(); ++i)
      CHECK(std::abs(int(via_planes.bytes()[i]) - int(direct.bytes()[i])) <= 1);
  }

  TEST_CASE("self-swap leaves the image unchanged") {
    Rng rng(27);
    for (int trial = 0; trial < 10; ++trial) {
      const ImageRGB img = noise_image(40, 30, rng);
      std::vector<Point> lm(8);
      for (auto& p : lm) p = {rng.uniform(2, 38), rng.uniform(2, 28)};
      const SwapResult r = swap_garment(img, lm, img, lm);
      CHECK(r.image == img);
      CHECK(r.source_bbox == r.dest_bbox);
      CHECK(r.composited == rasterize(clockwise_sort(lm), 40, 30).popcount());
    }
  }

  TEST_CASE("small rectangle pasted into a larger box") {
    Rng rng(28);
    const ImageRGB src = noise_image(20, 20, rng);
    const ImageRGB dst = noise_image(20, 20, rng);
    const SwapResult r = swap_garment(src, rect_landmarks(3, 3, 7, 7), dst,
                                      rect_landmarks(6, 5, 14, 13));
    CHECK(r.source_bbox == PixelRect{3, 3, 7, 7});
    CHECK(r.dest_bbox == PixelRect{6, 5, 14, 13});
    CHECK(r.composited == 64);
    for (std::size_t y = 0; y < 20; ++y)
      for (std::size_t x = 0; x < 20; ++x) {
        const bool inside = x >= 6 && x < 14 && y >= 5 && y < 13;
        if (!inside) CHECK(r.image.at(x, y) == dst.at(x, y));
      }
  }

  TEST_CASE("full-frame destination is entirely covered") {
    Rng rng(29);
    const ImageRGB src = noise_image(16, 16, rng);
    const ImageRGB dst = noise_image(24, 18, rng);
    const SwapResult r = swap_garment(src, rect_landmarks(4, 2, 12, 14), dst,
                                      rect_landmarks(0, 0, 24, 18));
    CHECK(r.composited == 24 * 18);
  }

  TEST_CASE("swap rejects wrong landmark counts and degenerate polygons") {
    const ImageRGB img(10, 10);
    CHECK_THROWS_AS(swap_garment(img, rect_landmarks(1, 1, 5, 5), img, {{1, 1}, {2, 2}, {3, 1}}),
                    Error);
    const std::vector<Point> same(8, Point{3, 3});
    CHECK_THROWS_AS(swap_garment(img, same, img, rect_landmarks(1, 1, 5, 5)), Error);
  }

  TEST_CASE("overlay draws only near the points") {
    const ImageRGB img(10, 10, Rgb{0, 0, 0});
    const ImageRGB out = overlay_landmarks(img, {{5.2, 5.7}});
    std::size_t changed = 0;
    for (std::size_t y = 0; y < 10; ++y)
      for (std::size_t x = 0; x < 10; ++x) changed += !(out.at(x, y) == Rgb{});
    CHECK(changed == 9);
    CHECK_FALSE(out.at(5, 5) == Rgb{});
  }

  TEST_CASE("landmark document round trip") {
    LandmarkDocument doc;
    doc.landmarks = rect_landmarks(1, 2, 30.25, 40.5);
    const LandmarkDocument back = parse_landmark_json(landmark_json(doc));
    CHECK(back.landmarks == doc.landmarks);
    CHECK(back.order == "deepfashion-v1");

    CHECK_THROWS_AS(parse_landmark_json(R"({"landmarks": [[1,2]], "order": "deepfashion-v1"})"),
                    Error);
    CHECK_THROWS_AS(parse_landmark_json(R"({"landmarks": [[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2]], "order": "other"})"),
                    Error);
    CHECK_THROWS_AS(parse_landmark_json("not json"), Error);
  }
}
