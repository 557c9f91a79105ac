#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spooky/core_types.hpp"
#include "spooky/mask_render.hpp"
#include "spooky/noise.hpp"

// Synthetic stand-ins for the object-image and dynamic-scene categories.
namespace scene {

using spooky::ContentMask;
using spooky::FrameBuffer;

struct Canvas {
  int w, h;
  std::vector<std::uint8_t> px;
  Canvas(int w_, int h_) : w(w_), h(h_), px(static_cast<std::size_t>(w_) * h_, 0) {}

  void ellipse(double cx, double cy, double rx, double ry, double angle, std::uint8_t v = 1) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double r = std::max(rx, ry);
    for (int y = std::max(0, int(cy - r) - 1); y <= std::min(h - 1, int(cy + r) + 1); ++y) {
      for (int x = std::max(0, int(cx - r) - 1); x <= std::min(w - 1, int(cx + r) + 1); ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * c + dy * s) / rx, t = (-dx * s + dy * c) / ry;
        if (u * u + t * t <= 1.0) px[static_cast<std::size_t>(y) * w + x] = v;
      }
    }
  }

  // Stroke of half-width `r` from (x0, y0) to (x1, y1).
  void stroke(double x0, double y0, double x1, double y1, double r, std::uint8_t v = 1) {
    const double lx = x1 - x0, ly = y1 - y0, len2 = lx * lx + ly * ly;
    for (int y = std::max(0, int(std::min(y0, y1) - r) - 1);
         y <= std::min(h - 1, int(std::max(y0, y1) + r) + 1); ++y) {
      for (int x = std::max(0, int(std::min(x0, x1) - r) - 1);
           x <= std::min(w - 1, int(std::max(x0, x1) + r) + 1); ++x) {
        const double t = len2 > 0 ? std::clamp(((x - x0) * lx + (y - y0) * ly) / len2, 0.0, 1.0) : 0.0;
        if (std::hypot(x - x0 - t * lx, y - y0 - t * ly) <= r) {
          px[static_cast<std::size_t>(y) * w + x] = v;
        }
      }
    }
  }
};

inline double jitter(std::uint64_t seed, int k) {
  return spooky::unit_interval(spooky::stream_draw(spooky::stream_key(seed, 7), static_cast<std::uint64_t>(k)));
}

// Three body segments, six legs and two antennae, scaled and rotated per seed.
inline ContentMask ant(int w, int h, std::uint64_t seed) {
  Canvas c(w, h);
  const double s = std::min(w, h) / 540.0 * (0.7 + 0.25 * jitter(seed, 0));
  const double a = (jitter(seed, 1) - 0.5) * 0.8;
  const double cx = w / 2.0 + (jitter(seed, 2) - 0.5) * w * 0.2;
  const double cy = h / 2.0 + (jitter(seed, 3) - 0.5) * h * 0.2;
  const double ca = std::cos(a), sa = std::sin(a);
  auto at = [&](double u, double v) { return std::pair{cx + s * (u * ca - v * sa), cy + s * (u * sa + v * ca)}; };
  const auto [hx, hy] = at(-130, 0);
  const auto [tx, ty] = at(-45, 0);
  const auto [bx, by] = at(85, 0);
  c.ellipse(hx, hy, 38 * s, 32 * s, a);
  c.ellipse(tx, ty, 55 * s, 24 * s, a);
  c.ellipse(bx, by, 85 * s, 55 * s, a);
  for (int side : {-1, 1}) {
    for (int k = 0; k < 3; ++k) {
      const double u0 = -70 + 25 * k;
      const auto [x0, y0] = at(u0, 0);
      const auto [x1, y1] = at(u0 + (k - 1) * 45, side * 70);
      const auto [x2, y2] = at(u0 + (k - 1) * 90, side * 150);
      c.stroke(x0, y0, x1, y1, 6 * s);
      c.stroke(x1, y1, x2, y2, 5 * s);
    }
    const auto [ax, ay] = at(-190, side * 45);
    const auto [bx2, by2] = at(-235, side * 95);
    c.stroke(hx, hy, ax, ay, 4 * s);
    c.stroke(ax, ay, bx2, by2, 4 * s);
  }
  return ContentMask(w, h, std::move(c.px));
}

// A figure walking across the frame at depth 200 over a floor at depth 40.
// Depth values inside [lower, upper] = [100, 255] mark the figure.
inline spooky::DepthSequence walker(int w, int h, int frames, std::uint64_t seed) {
  std::vector<FrameBuffer> out;
  const double s = std::min(w, h) / 540.0 * (0.8 + 0.4 * jitter(seed, 0));
  const double x0 = w * (0.25 + 0.1 * jitter(seed, 1));
  const double speed = w * (0.3 + 0.2 * jitter(seed, 2)) / std::max(1, frames - 1);
  const double base = h * (0.7 + 0.1 * jitter(seed, 3));
  for (int f = 0; f < frames; ++f) {
    Canvas c(w, h);
    std::fill(c.px.begin(), c.px.end(), std::uint8_t{40});
    const double x = x0 + speed * f;
    const double phase = std::sin(f * 0.35 + jitter(seed, 4) * 6.0);
    const double hip = base - 170 * s;
    c.ellipse(x, hip - 190 * s, 30 * s, 34 * s, 0, 200);               // head
    c.ellipse(x, hip - 85 * s, 42 * s, 80 * s, 0, 200);                // torso
    c.stroke(x, hip, x + 45 * s * phase, base, 13 * s, 200);           // legs
    c.stroke(x, hip, x - 45 * s * phase, base, 13 * s, 200);
    c.stroke(x, hip - 150 * s, x - 50 * s * phase, hip - 40 * s, 10 * s, 200);  // arms
    c.stroke(x, hip - 150 * s, x + 50 * s * phase, hip - 40 * s, 10 * s, 200);
    out.emplace_back(w, h, std::move(c.px));
  }
  return spooky::DepthSequence(std::move(out));
}

inline const std::vector<std::string>& words() {
  static const std::vector<std::string> w{"GOLD", "FISH", "MOON", "BIRD", "TREE",
                                          "LAMP", "DOOR", "BOOK", "SHIP", "STAR"};
  return w;
}

// Circles, rectangles and triangles of varying size and placement.
inline spooky::ShapeSpec shape(int w, int h, int k) {
  const double u = jitter(static_cast<std::uint64_t>(k), 0), v = jitter(static_cast<std::uint64_t>(k), 1);
  const double cx = w * (0.4 + 0.2 * u), cy = h * (0.4 + 0.2 * v);
  const double r = std::min(w, h) * (0.2 + 0.1 * jitter(static_cast<std::uint64_t>(k), 2));
  switch (k % 3) {
    case 0:
      return {spooky::CircleShape{{cx, cy}, r}, w, h};
    case 1:
      return {spooky::RectangleShape{{cx - r, cy - r * 0.8}, 2 * r, 1.6 * r}, w, h};
    default:
      return {spooky::PolygonShape{{{cx, cy - r}, {cx + r, cy + r * 0.8}, {cx - r, cy + r * 0.8}}}, w, h};
  }
}

}  // namespace scene
