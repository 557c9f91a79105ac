#include "spooky/optical_flow.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>

namespace spooky {

void validate(const FlowOptions& o) {
  if (o.window < 1) throw Error(ErrorCode::InvalidArgument, "window must be >= 1", "window");
  if (o.max_disp < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_disp must be >= 1", "max_disp");
  }
  if (o.levels < 1) throw Error(ErrorCode::InvalidArgument, "levels must be >= 1", "levels");
  if (o.smoothing < 0) {
    throw Error(ErrorCode::InvalidArgument, "smoothing must be >= 0", "smoothing");
  }
}

namespace {

struct Image {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> px;
  const std::uint8_t* row(int y) const { return px.data() + static_cast<std::size_t>(y) * w; }
};

Image downsample(const Image& src) {
  Image dst;
  dst.w = src.w / 2;
  dst.h = src.h / 2;
  dst.px.resize(static_cast<std::size_t>(dst.w) * dst.h);
  for (int y = 0; y < dst.h; ++y) {
    const auto* r0 = src.row(2 * y);
    const auto* r1 = src.row(2 * y + 1);
    auto* out = dst.px.data() + static_cast<std::size_t>(y) * dst.w;
    for (int x = 0; x < dst.w; ++x) {
      const unsigned s = r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1];
      out[x] = static_cast<std::uint8_t>((s + 2) >> 2);
    }
  }
  return dst;
}

struct Displacement {
  int du;
  int dv;
};

bool tie_order(const Displacement& a, const Displacement& b) {
  const int la = a.du * a.du + a.dv * a.dv;
  const int lb = b.du * b.du + b.dv * b.dv;
  if (la != lb) return la < lb;
  if (a.dv != b.dv) return a.dv < b.dv;
  return a.du < b.du;
}

constexpr int kTileW = 64;
constexpr int kTileH = 32;

// Per-pixel best candidate search over rectangular tiles. Candidates are
// evaluated in tie order and only a strictly smaller cost replaces the
// incumbent, which realises the documented total order.
template <typename Sum>
class LevelMatcher {
 public:
  LevelMatcher(const Image& a, const Image& b, int radius)
      : a_(a), b_(b), r_(radius), taps_(2 * radius + 1), w_(a.w), h_(a.h) {
    const auto padded = static_cast<std::size_t>(kTileW + 2 * r_);
    shifted_.resize(padded);
    diff8_.resize(padded);
    pow_a_.resize(padded);
    pow_b_.resize(padded);
    ring_.resize(static_cast<std::size_t>(taps_) * kTileW);
    col_.resize(kTileW);
    best_.assign(static_cast<std::size_t>(w_) * h_, std::numeric_limits<Sum>::max());
    du_.assign(best_.size(), 0);
    dv_.assign(best_.size(), 0);
  }

  void evaluate(Displacement d, int x0, int x1, int y0, int y1) {
    const int tw = x1 - x0;
    Sum* __restrict col = col_.data();
    std::fill(col, col + tw, Sum{0});
    std::fill(ring_.begin(), ring_.end(), Sum{0});
    // Rows outside the frame contribute nothing, which truncates the window.
    for (int k = std::max(0, y0 - r_); k < std::min(h_, y0 + r_); ++k) {
      Sum* row = ring_row(k);
      horizontal_sum(k, d, x0, x1, row);
      for (int i = 0; i < tw; ++i) col[i] = static_cast<Sum>(col[i] + row[i]);
    }
    const auto du = static_cast<std::int16_t>(d.du);
    const auto dv = static_cast<std::int16_t>(d.dv);
    for (int y = y0; y < y1; ++y) {
      // Row y + r enters and row y - r - 1 leaves; both map to the same slot.
      const int enter = y + r_;
      Sum* __restrict row = ring_row(enter);
      for (int i = 0; i < tw; ++i) col[i] = static_cast<Sum>(col[i] - row[i]);
      if (enter < h_) {
        horizontal_sum(enter, d, x0, x1, row);
        for (int i = 0; i < tw; ++i) col[i] = static_cast<Sum>(col[i] + row[i]);
      } else {
        std::fill(row, row + tw, Sum{0});
      }
      const std::size_t base = static_cast<std::size_t>(y) * w_ + x0;
      Sum* __restrict best = best_.data() + base;
      std::int16_t* __restrict bu = du_.data() + base;
      std::int16_t* __restrict bv = dv_.data() + base;
      for (int i = 0; i < tw; ++i) {
        const auto take = static_cast<std::int16_t>(-static_cast<int>(col[i] < best[i]));
        best[i] = std::min(col[i], best[i]);
        bu[i] = static_cast<std::int16_t>((bu[i] & ~take) | (du & take));
        bv[i] = static_cast<std::int16_t>((bv[i] & ~take) | (dv & take));
      }
    }
  }

  std::vector<std::int16_t>& u() { return du_; }
  std::vector<std::int16_t>& v() { return dv_; }

 private:
  Sum* ring_row(int y) {
    const int slot = ((y % taps_) + taps_) % taps_;
    return ring_.data() + static_cast<std::size_t>(slot) * kTileW;
  }

  // out[i] = sum of |a - shifted b| over columns x0 + i - r .. x0 + i + r of
  // row y, columns outside the frame counting as zero.
  void horizontal_sum(int y, Displacement d, int x0, int x1, Sum* __restrict out) {
    const int tw = x1 - x0;
    const int m = tw + 2 * r_;
    const int ex0 = std::max(0, x0 - r_);
    const int ex1 = std::min(w_, x1 + r_);
    const int pad = ex0 - (x0 - r_);
    const auto* brow = b_.row(std::clamp(y + d.dv, 0, h_ - 1));
    auto* __restrict sh = shifted_.data() + pad;
    const int n = ex1 - ex0;
    const int lo = std::clamp(-d.du, ex0, ex1);
    const int hi = std::clamp(w_ - d.du, lo, ex1);
    std::fill(sh, sh + (lo - ex0), brow[0]);
    if (hi > lo) std::memcpy(sh + (lo - ex0), brow + lo + d.du, static_cast<std::size_t>(hi - lo));
    std::fill(sh + (hi - ex0), sh + n, brow[w_ - 1]);

    const auto* __restrict arow = a_.row(y) + ex0;
    std::uint8_t* __restrict d8 = diff8_.data();
    std::fill(d8, d8 + pad, std::uint8_t{0});
    for (int i = 0; i < n; ++i) {
      d8[pad + i] = static_cast<std::uint8_t>(std::max(arow[i], sh[i]) - std::min(arow[i], sh[i]));
    }
    std::fill(d8 + pad + n, d8 + m, std::uint8_t{0});

    // Window of length taps by binary doubling: p holds sums of `len`
    // consecutive entries, out accumulates the set bits of taps.
    Sum* __restrict p = pow_a_.data();
    Sum* __restrict q = pow_b_.data();
    for (int i = 0; i < m; ++i) p[i] = d8[i];
    int len = 1;
    int covered = 0;
    int valid = m;  // p[i] is defined for i < valid
    for (int bits = taps_;; bits >>= 1) {
      if (bits & 1) {
        if (covered == 0) {
          std::copy(p, p + tw, out);
        } else {
          const Sum* __restrict src = p + covered;
          for (int i = 0; i < tw; ++i) out[i] = static_cast<Sum>(out[i] + src[i]);
        }
        covered += len;
      }
      if ((bits >> 1) == 0) break;
      valid -= len;
      for (int i = 0; i < valid; ++i) q[i] = static_cast<Sum>(p[i] + p[i + len]);
      std::swap(p, q);
      len *= 2;
    }
  }

  const Image& a_;
  const Image& b_;
  int r_;
  int taps_;
  int w_;
  int h_;
  std::vector<std::uint8_t> shifted_;
  std::vector<std::uint8_t> diff8_;
  std::vector<Sum> pow_a_;
  std::vector<Sum> pow_b_;
  std::vector<Sum> ring_;
  std::vector<Sum> col_;
  std::vector<Sum> best_;
  std::vector<std::int16_t> du_;
  std::vector<std::int16_t> dv_;
};

int scaled_range(int max_disp, int level) {
  const int f = 1 << level;
  return (max_disp + f - 1) / f;
}

// Coarse estimates, already doubled to the current level, seen by a tile.
struct Guide {
  const std::vector<std::int16_t>* u = nullptr;
  const std::vector<std::int16_t>* v = nullptr;
  int w = 0;
  int h = 0;
};

// Coarse estimates seen fewer times than this inside a tile are treated as
// outliers, unless none is seen more often.
constexpr int kMinSupport = 8;

// Candidates for a tile in tie order: every displacement within +-1 of a
// supported coarse estimate over the tile grown by one coarse pixel, or the
// full search range when there is no guide.
std::vector<Displacement> tile_candidates(int range, int x0, int x1, int y0, int y1,
                                          const Guide& g) {
  const int span = 2 * range + 1;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(span) * span, g.u ? 0 : 1);
  if (g.u) {
    const int cx0 = std::max(0, x0 / 2 - 1);
    const int cx1 = std::min(g.w - 1, (x1 - 1) / 2 + 1);
    const int cy0 = std::max(0, y0 / 2 - 1);
    const int cy1 = std::min(g.h - 1, (y1 - 1) / 2 + 1);
    std::vector<std::pair<Displacement, int>> counts;
    for (int cy = cy0; cy <= cy1; ++cy) {
      for (int cx = cx0; cx <= cx1; ++cx) {
        const auto i = static_cast<std::size_t>(cy) * g.w + cx;
        const Displacement c{(*g.u)[i], (*g.v)[i]};
        auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& e) {
          return e.first.du == c.du && e.first.dv == c.dv;
        });
        if (it == counts.end()) {
          counts.push_back({c, 1});
        } else {
          ++it->second;
        }
      }
    }
    int most = 0;
    for (const auto& e : counts) most = std::max(most, e.second);
    for (const auto& [c, n] : counts) {
      if (n < kMinSupport && n < most) continue;
      const int gu = 2 * c.du;
      const int gv = 2 * c.dv;
      for (int dv = std::max(-range, gv - 1); dv <= std::min(range, gv + 1); ++dv) {
        for (int du = std::max(-range, gu - 1); du <= std::min(range, gu + 1); ++du) {
          seen[static_cast<std::size_t>(dv + range) * span + (du + range)] = 1;
        }
      }
    }
  }
  std::vector<Displacement> out;
  for (int dv = -range; dv <= range; ++dv) {
    for (int du = -range; du <= range; ++du) {
      if (seen[static_cast<std::size_t>(dv + range) * span + (du + range)]) out.push_back({du, dv});
    }
  }
  std::sort(out.begin(), out.end(), tie_order);
  return out;
}

template <typename Sum>
void match_level(const Image& a, const Image& b, int window, int range, const Guide& g,
                 std::vector<std::int16_t>& out_u, std::vector<std::int16_t>& out_v) {
  LevelMatcher<Sum> m(a, b, window);
  for (int y0 = 0; y0 < a.h; y0 += kTileH) {
    const int y1 = std::min(a.h, y0 + kTileH);
    for (int x0 = 0; x0 < a.w; x0 += kTileW) {
      const int x1 = std::min(a.w, x0 + kTileW);
      for (const auto& d : tile_candidates(range, x0, x1, y0, y1, g)) m.evaluate(d, x0, x1, y0, y1);
    }
  }
  out_u = std::move(m.u());
  out_v = std::move(m.v());
}

void run_level(const Image& a, const Image& b, int window, int range, const Guide& g,
               std::vector<std::int16_t>& out_u, std::vector<std::int16_t>& out_v) {
  const long long block = static_cast<long long>(2 * window + 1) * (2 * window + 1);
  if (block * 255 <= std::numeric_limits<std::uint16_t>::max()) {
    match_level<std::uint16_t>(a, b, window, range, g, out_u, out_v);
  } else {
    match_level<std::uint32_t>(a, b, window, range, g, out_u, out_v);
  }
}

std::vector<float> box_smooth(const std::vector<int>& f, int w, int h, int r) {
  std::vector<float> out(f.size());
  if (r == 0) {
    std::transform(f.begin(), f.end(), out.begin(), [](int v) { return static_cast<float>(v); });
    return out;
  }
  // Separable sums with truncated windows; counts follow the truncation.
  std::vector<long long> hs(f.size());
  for (int y = 0; y < h; ++y) {
    const int* row = f.data() + static_cast<std::size_t>(y) * w;
    long long* dst = hs.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      long long s = 0;
      for (int k = std::max(0, x - r); k <= std::min(w - 1, x + r); ++k) s += row[k];
      dst[x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      long long s = 0;
      for (int k = y0; k <= y1; ++k) s += hs[static_cast<std::size_t>(k) * w + x];
      const int cols = std::min(w - 1, x + r) - std::max(0, x - r) + 1;
      const int count = cols * (y1 - y0 + 1);
      out[static_cast<std::size_t>(y) * w + x] =
          static_cast<float>(static_cast<double>(s) / count);
    }
  }
  return out;
}

Image to_image(const FrameBuffer& f) {
  return Image{f.width(), f.height(), std::vector<std::uint8_t>(f.pixels().begin(),
                                                                f.pixels().end())};
}

}  // namespace

IntegerFlow match_blocks(const FrameBuffer& a, const FrameBuffer& b, const FlowOptions& o) {
  validate(o);
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::DimensionMismatch, "flow frames differ in size");
  }
  const int min_side = 2 * border_band(o);
  if (a.width() < min_side || a.height() < min_side) {
    throw Error(ErrorCode::FrameTooSmall, "frames must be at least " + std::to_string(min_side) +
                                              " pixels on each side");
  }

  std::vector<Image> pa{to_image(a)};
  std::vector<Image> pb{to_image(b)};
  while (static_cast<int>(pa.size()) < o.levels && pa.back().w / 2 >= 8 && pa.back().h / 2 >= 8) {
    pa.push_back(downsample(pa.back()));
    pb.push_back(downsample(pb.back()));
  }
  const int top = static_cast<int>(pa.size()) - 1;

  if (o.max_disp > std::numeric_limits<std::int16_t>::max() / 2) {
    throw Error(ErrorCode::InvalidArgument, "max_disp is too large", "max_disp");
  }
  // Coarsest level: exhaustive search.
  std::vector<std::int16_t> cu;
  std::vector<std::int16_t> cv;
  run_level(pa[top], pb[top], o.window, scaled_range(o.max_disp, top), Guide{}, cu, cv);

  for (int level = top - 1; level >= 0; --level) {
    const Image& coarse = pa[static_cast<std::size_t>(level + 1)];
    const Guide g{&cu, &cv, coarse.w, coarse.h};
    std::vector<std::int16_t> nu;
    std::vector<std::int16_t> nv;
    run_level(pa[static_cast<std::size_t>(level)], pb[static_cast<std::size_t>(level)], o.window,
              scaled_range(o.max_disp, level), g, nu, nv);
    cu = std::move(nu);
    cv = std::move(nv);
  }
  return IntegerFlow{a.width(), a.height(), std::vector<int>(cu.begin(), cu.end()),
                     std::vector<int>(cv.begin(), cv.end())};
}

FlowField estimate_flow(const FrameBuffer& a, const FrameBuffer& b, const FlowOptions& o) {
  auto m = match_blocks(a, b, o);
  return FlowField(m.width, m.height, box_smooth(m.u, m.width, m.height, o.smoothing),
                   box_smooth(m.v, m.width, m.height, o.smoothing));
}

std::vector<FlowField> flow_sequence(const FrameSequence& seq, const FlowOptions& o) {
  if (seq.size() < 2) throw Error(ErrorCode::TooFewFrames, "flow needs at least 2 frames");
  std::vector<FlowField> out;
  out.reserve(seq.size() - 1);
  for_each_flow(seq, o, [&](std::size_t, const FlowField& f) { out.push_back(f); });
  return out;
}

void for_each_flow(const FrameSequence& seq, const FlowOptions& o,
                   const std::function<void(std::size_t, const FlowField&)>& sink) {
  if (seq.size() < 2) throw Error(ErrorCode::TooFewFrames, "flow needs at least 2 frames");
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    sink(i, estimate_flow(seq[i], seq[i + 1], o));
  }
}

}  // namespace spooky
