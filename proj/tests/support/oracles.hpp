#pragma once

// Straight-line reference implementations used as test oracles. Nothing here
// calls into the library; each function restates the documented rule in the
// most literal form available.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Plane = std::vector<std::uint8_t>;  // row-major, width * height

inline std::uint64_t splitmix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t stream) {
  return splitmix(seed ^ ((stream + 1) * 0xD1B54A32D192ED03ULL));
}

inline double uniform(std::uint64_t k, std::uint64_t i) {
  const std::uint64_t d = splitmix(k + (i + 1) * 0x9E3779B97F4A7C15ULL);
  return std::ldexp(static_cast<double>(d >> 11), -53);
}

inline Plane noise(int w, int h, int b, double density, std::uint64_t k) {
  const int bx = (w + b - 1) / b;
  Plane p(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint64_t block = static_cast<std::uint64_t>(y / b) * bx + x / b;
      p[static_cast<std::size_t>(y) * w + x] = uniform(k, block) < density ? 255 : 0;
    }
  }
  for (int x = 0; x < w; ++x) p[static_cast<std::size_t>(h - 1) * w + x] = p[x];
  for (int y = 0; y < h; ++y) {
    p[static_cast<std::size_t>(y) * w + w - 1] = p[static_cast<std::size_t>(y) * w];
  }
  return p;
}

inline long long wrap(long long i, long long n) { return ((i % n) + n) % n; }

inline std::uint8_t at(const Plane& p, int w, int h, long long x, long long y) {
  return p[static_cast<std::size_t>(wrap(y, h)) * w + static_cast<std::size_t>(wrap(x, w))];
}

struct Params {
  int w, h, fps;
  double duration, vx, vy;
  int block;
  double density;
  std::uint64_t seed;
};

inline int frames(const Params& p) {
  return static_cast<int>(std::llround(p.fps * p.duration));
}

// Mask animation: foreground scrolls one pattern, background the other one
// in the opposite direction.
inline std::vector<Plane> encode_mask(const std::vector<std::uint8_t>& mask, const Params& p) {
  const Plane bg = noise(p.w, p.h, p.block, p.density, key(p.seed, 0));
  const Plane fg = noise(p.w, p.h, p.block, p.density, key(p.seed, 1));
  std::vector<Plane> out;
  for (int t = 0; t < frames(p); ++t) {
    const auto dx = static_cast<long long>(std::floor(p.vx * t));
    const auto dy = static_cast<long long>(std::floor(p.vy * t));
    Plane f(static_cast<std::size_t>(p.w) * p.h);
    for (int y = 0; y < p.h; ++y) {
      for (int x = 0; x < p.w; ++x) {
        const auto i = static_cast<std::size_t>(y) * p.w + x;
        f[i] = mask[i] ? at(fg, p.w, p.h, x + dx, y + dy) : at(bg, p.w, p.h, x - dx, y - dy);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

// Depth animation: pixels inside the depth band scroll, the rest stay still.
inline std::vector<Plane> encode_depth(const std::vector<Plane>& depth, int lower, int upper,
                                     const Params& p) {
  const Plane n = noise(p.w, p.h, p.block, p.density, key(p.seed, 0));
  const int count = frames(p);
  std::vector<Plane> out;
  for (int t = 0; t < count; ++t) {
    std::size_t di = static_cast<std::size_t>(t) * depth.size() / count;
    if (di >= depth.size()) di = depth.size() - 1;
    const Plane& d = depth[di];
    const auto dx = static_cast<long long>(std::floor(p.vx * t));
    const auto dy = static_cast<long long>(std::floor(p.vy * t));
    Plane f(static_cast<std::size_t>(p.w) * p.h);
    for (int y = 0; y < p.h; ++y) {
      for (int x = 0; x < p.w; ++x) {
        const auto i = static_cast<std::size_t>(y) * p.w + x;
        const bool moving = d[i] >= lower && d[i] <= upper;
        f[i] = moving ? at(n, p.w, p.h, x + dx, y + dy) : n[i];
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

// Brute-force DFT of the zero-padded power-of-two grid, weighted by
// f exp(-f / f0) on the folded radial frequency.
inline double weighted_energy(int w, int h, const std::vector<double>& values, double f0) {
  int pw = 1, ph = 1;
  while (pw < w) pw <<= 1;
  while (ph < h) ph <<= 1;
  const double two_pi = 2.0 * std::acos(-1.0);
  double energy = 0.0;
  for (int ky = 0; ky < ph; ++ky) {
    for (int kx = 0; kx < pw; ++kx) {
      std::complex<double> c = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double ang = -two_pi * (static_cast<double>(kx) * x / pw +
                                        static_cast<double>(ky) * y / ph);
          c += values[static_cast<std::size_t>(y) * w + x] * std::polar(1.0, ang);
        }
      }
      const double fx = static_cast<double>(std::min(kx, pw - kx)) / pw;
      const double fy = static_cast<double>(std::min(ky, ph - ky)) / ph;
      const double f = std::hypot(fx, fy);
      const double wt = f * std::exp(-f / f0);
      energy += std::norm(c) * wt * wt;
    }
  }
  return energy;
}

// Integer shift (u, v), |u|, |v| <= r, minimising the wrapped SAD between
// a(x, y) and b(x + u, y + v). Restricted to pixels where `use` is set.
inline std::pair<int, int> global_shift(const Plane& a, const Plane& b, int w, int h, int r,
                                        const std::vector<std::uint8_t>* use = nullptr) {
  long long best = std::numeric_limits<long long>::max();
  std::pair<int, int> arg{0, 0};
  for (int v = -r; v <= r; ++v) {
    for (int u = -r; u <= r; ++u) {
      long long sad = 0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const auto i = static_cast<std::size_t>(y) * w + x;
          if (use && !(*use)[i]) continue;
          sad += std::abs(int(a[i]) - int(at(b, w, h, x + u, y + v)));
        }
      }
      if (sad < best) {
        best = sad;
        arg = {u, v};
      }
    }
  }
  return arg;
}

// Point-biserial correlation between pixel values and binary labels.
inline double point_biserial(const Plane& px, const std::vector<std::uint8_t>& bits) {
  double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double x = px[i];
    const double y = bits[i] ? 1.0 : 0.0;
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double vx = sxx / n - (sx / n) * (sx / n);
  const double vy = syy / n - (sy / n) * (sy / n);
  return cov / std::sqrt(vx * vy);
}

// The 2x2 single-frame Y4M stream, assembled by hand.
inline std::vector<std::uint8_t> y4m_2x2() {
  const std::string header = "YUV4MPEG2 W2 H2 F30:1 Ip A1:1 C420jpeg\nFRAME\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::uint8_t b : {0x00, 0xFF, 0xFF, 0x00, 0x80, 0x80}) out.push_back(b);
  return out;
}

}  // namespace oracle
