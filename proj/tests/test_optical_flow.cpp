#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "spooky/encoder.hpp"
#include "spooky/mask_render.hpp"
#include "spooky/noise.hpp"
#include "spooky/optical_flow.hpp"
#include "support/oracles.hpp"

using namespace spooky;

namespace {

FrameBuffer shifted(const NoisePattern& p, int sx, int sy) {
  // b(x, y) = a(x - sx, y - sy), so the flow from a to b is (sx, sy).
  std::vector<std::uint8_t> px(static_cast<std::size_t>(p.width()) * p.height());
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      px[static_cast<std::size_t>(y) * p.width() + x] = p.sample_wrapped(x - sx, y - sy);
    }
  }
  return FrameBuffer(p.width(), p.height(), std::move(px));
}

double median(std::vector<float> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

std::pair<double, double> interior_median(const FlowField& f, int band) {
  std::vector<float> u, v;
  for (int y = band; y < f.height() - band; ++y) {
    for (int x = band; x < f.width() - band; ++x) {
      u.push_back(f.u_at(x, y));
      v.push_back(f.v_at(x, y));
    }
  }
  return {median(u), median(v)};
}

std::vector<std::uint8_t> plane(const FrameBuffer& f) {
  return {f.pixels().begin(), f.pixels().end()};
}

// Exhaustive single-scale block matching with the documented tie order.
IntegerFlow brute_force(const FrameBuffer& a, const FrameBuffer& b, int window, int range) {
  const int w = a.width(), h = a.height();
  IntegerFlow out{w, h, std::vector<int>(static_cast<std::size_t>(w) * h),
                  std::vector<int>(static_cast<std::size_t>(w) * h)};
  auto clamp = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      long best = -1;
      int bu = 0, bv = 0;
      for (int v = -range; v <= range; ++v) {
        for (int u = -range; u <= range; ++u) {
          long sad = 0;
          for (int dy = -window; dy <= window; ++dy) {
            for (int dx = -window; dx <= window; ++dx) {
              const int ax = x + dx, ay = y + dy;
              if (ax < 0 || ay < 0 || ax >= w || ay >= h) continue;
              sad += std::abs(int(a.at(ax, ay)) - int(b.at(clamp(ax + u, w), clamp(ay + v, h))));
            }
          }
          const auto key = [](int uu, int vv) {
            return std::tuple(uu * uu + vv * vv, vv, uu);
          };
          if (best < 0 || sad < best || (sad == best && key(u, v) < key(bu, bv))) {
            best = sad;
            bu = u;
            bv = v;
          }
        }
      }
      out.u[static_cast<std::size_t>(y) * w + x] = bu;
      out.v[static_cast<std::size_t>(y) * w + x] = bv;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("identical frames give exactly zero flow") {
  const auto p = generate_noise(48, 40, 1, 0.5, 3);
  const auto f = estimate_flow(p.frame(), p.frame());
  for (auto v : f.u()) CHECK(v == 0.0f);
  for (auto v : f.v()) CHECK(v == 0.0f);
}

TEST_CASE("vertical scroll by 2 is recovered") {
  const auto p = generate_noise(64, 64, 1, 0.5, 42);
  const auto b = shifted(p, 0, 2);
  CHECK(oracle::global_shift(plane(p.frame()), plane(b), 64, 64, 6) == std::pair{0, 2});
  const FlowOptions o;
  const auto [mu, mv] = interior_median(estimate_flow(p.frame(), b, o), border_band(o));
  CHECK(mv >= 1.5);
  CHECK(mv <= 2.5);
  CHECK(std::abs(mu) <= 0.5);
}

TEST_CASE("random shifts agree with the global correlation oracle") {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> s(-6, 6);
  for (int i = 0; i < 20; ++i) {
    const int sx = s(rng), sy = s(rng);
    const auto p = generate_noise(64, 64, 1 + i % 2, 0.5, static_cast<std::uint64_t>(i));
    const auto b = shifted(p, sx, sy);
    CHECK(oracle::global_shift(plane(p.frame()), plane(b), 64, 64, 6) == std::pair{sx, sy});
    const FlowOptions o;
    const auto [mu, mv] = interior_median(estimate_flow(p.frame(), b, o), border_band(o));
    CHECK(std::abs(mu - sx) <= 0.5);
    CHECK(std::abs(mv - sy) <= 0.5);
  }
}

TEST_CASE("single-scale matching equals the exhaustive oracle") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = generate_noise(24, 20, 1, 0.5, seed);
    const auto q = generate_noise(24, 20, 1, 0.5, seed + 100);
    // Half the frame moves, the other half is unrelated noise.
    std::vector<std::uint8_t> px(24 * 20);
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 24; ++x) {
        px[static_cast<std::size_t>(y) * 24 + x] =
            x < 12 ? p.sample_wrapped(x + 1, y - 2) : q.at(x, y);
      }
    }
    const FrameBuffer b(24, 20, px);
    FlowOptions o;
    o.window = 2;
    o.max_disp = 3;
    o.levels = 1;
    o.smoothing = 0;
    const auto got = match_blocks(p.frame(), b, o);
    const auto want = brute_force(p.frame(), b, 2, 3);
    CHECK(got.u == want.u);
    CHECK(got.v == want.v);
  }
}

TEST_CASE("opposing motion separates foreground and background") {
  EncodingParams e;
  e.width = 96;
  e.height = 96;
  e.fps = 4;
  e.duration_s = 1.0;
  e.seed = 5;
  const auto mask = render_shape_mask({CircleShape{{48, 48}, 24}, 96, 96});
  const auto seq = encode_mask_animation(mask, validate_params(e));
  const auto flow = estimate_flow(seq[0], seq[1]);
  const std::vector<std::uint8_t> bits(mask.bits().begin(), mask.bits().end());
  std::vector<std::uint8_t> inv(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) inv[i] = !bits[i];
  // With a(x, y) ~ b(x + u, y + v), the foreground samples rows below and
  // therefore measures -vy; the background measures +vy.
  CHECK(oracle::global_shift(plane(seq[0]), plane(seq[1]), 96, 96, 4, &bits) ==
        std::pair{0, -3});
  CHECK(oracle::global_shift(plane(seq[0]), plane(seq[1]), 96, 96, 4, &inv) ==
        std::pair{0, 3});
  double fg = 0, bg = 0;
  std::size_t nf = 0, nb = 0;
  const int band = border_band(FlowOptions{});
  for (int y = band; y < 96 - band; ++y) {
    for (int x = band; x < 96 - band; ++x) {
      if (mask.at(x, y)) {
        fg += flow.v_at(x, y);
        ++nf;
      } else {
        bg += flow.v_at(x, y);
        ++nb;
      }
    }
  }
  CHECK(fg / nf < 0.0);
  CHECK(bg / nb > 0.0);
}

TEST_CASE("sequences yield one flow per frame pair") {
  const auto p = generate_noise(40, 40, 1, 0.5, 1);
  const FrameSequence two({p.frame(), shifted(p, 0, 1)}, 30);
  CHECK(flow_sequence(two).size() == 1);
  const FrameSequence still({p.frame(), p.frame(), p.frame()}, 30);
  const auto flows = flow_sequence(still);
  REQUIRE(flows.size() == 2);
  for (const auto& f : flows) {
    for (auto v : f.v()) CHECK(v == 0.0f);
  }
  std::size_t calls = 0;
  for_each_flow(still, {}, [&](std::size_t i, const FlowField&) { CHECK(i == calls++); });
  CHECK(calls == 2);
  CHECK_THROWS_AS(flow_sequence(FrameSequence({p.frame()}, 30)), Error);
}

TEST_CASE("argument checks") {
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::SchemaViolation;
  };
  const FrameBuffer a(40, 40), small(10, 10);
  CHECK(code([&] { estimate_flow(a, FrameBuffer(40, 41)); }) == ErrorCode::DimensionMismatch);
  CHECK(code([&] { estimate_flow(small, small); }) == ErrorCode::FrameTooSmall);
  FlowOptions o;
  o.window = 0;
  CHECK(code([&] { validate(o); }) == ErrorCode::InvalidArgument);
  o = {};
  o.smoothing = -1;
  CHECK(code([&] { validate(o); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("default text-sized video flows are finite") {
  EncodingParams e;
  e.width = 160;
  e.height = 90;
  e.fps = 10;
  e.duration_s = 1.0;
  const auto mask = render_text_mask({"GOLD", 3, 160, 90});
  const auto seq = encode_mask_animation(mask, validate_params(e));
  const auto flows = flow_sequence(seq);
  CHECK(flows.size() == seq.size() - 1);
  for (const auto& f : flows) {
    for (auto v : f.u()) CHECK(std::isfinite(v));
  }
}
