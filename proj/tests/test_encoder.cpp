#include <doctest.h>

#include <random>

#include "spooky/encoder.hpp"
#include "spooky/mask_render.hpp"
#include "spooky/noise.hpp"
#include "support/oracles.hpp"

using namespace spooky;

namespace {

EncodingParams small(int w, int h, std::uint64_t seed, double vx = 0, double vy = 1,
                     int frames = 6, int block = 1) {
  EncodingParams p;
  p.width = w;
  p.height = h;
  p.fps = frames;
  p.duration_s = 1.0;
  p.velocity = {vx, vy};
  p.seed = seed;
  p.block_size = block;
  return p;
}

oracle::Params to_oracle(const EncodingParams& p) {
  return {p.width, p.height, p.fps, p.duration_s, p.velocity.vx, p.velocity.vy,
          p.block_size, p.density, p.seed};
}

std::vector<std::uint8_t> plane(const FrameBuffer& f) {
  return {f.pixels().begin(), f.pixels().end()};
}

ContentMask random_mask(int w, int h, std::mt19937& rng) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  std::bernoulli_distribution coin(0.4);
  for (auto& b : bits) b = coin(rng);
  bits[0] = 1;
  bits[1] = 0;
  return ContentMask(w, h, bits);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("frame offsets floor per axis") {
  CHECK(frame_offset({0, 3}, 4).dy == 12);
  CHECK(frame_offset({1.5, -1.5}, 3).dx == 4);
  CHECK(frame_offset({1.5, -1.5}, 3).dy == -5);
}

TEST_CASE("frame 0 selects the two patterns by mask") {
  const auto p = validate_params(small(16, 12, 3));
  std::mt19937 rng(1);
  const auto mask = random_mask(16, 12, rng);
  const auto f0 = encode_mask_frame(mask, p, 0);
  const auto bg = generate_stream_noise(16, 12, 1, 0.5, 3, kBackgroundStream);
  const auto fg = generate_stream_noise(16, 12, 1, 0.5, 3, kForegroundStream);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 16; ++x) {
      CHECK(f0.at(x, y) == (mask.at(x, y) ? fg.at(x, y) : bg.at(x, y)));
    }
  }
}

TEST_CASE("mask encoder equals the straight-line oracle") {
  std::mt19937 rng(7);
  for (auto [w, h] : {std::pair{8, 8}, {17, 13}}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      for (auto [vx, vy] : {std::pair{0.0, 1.0}, {0.0, 3.0}, {2.0, -1.5}}) {
        const auto params = small(w, h, seed, vx, vy, 8, 1 + static_cast<int>(seed % 3));
        const auto mask = random_mask(w, h, rng);
        const auto seq = encode_mask_animation(mask, validate_params(params));
        const auto want = oracle::encode_mask({mask.bits().begin(), mask.bits().end()},
                                             to_oracle(params));
        REQUIRE(seq.size() == want.size());
        for (std::size_t t = 0; t < want.size(); ++t) CHECK(plane(seq[t]) == want[t]);
      }
    }
  }
}

TEST_CASE("8x8 mask, vy = 1, frame 3 matches the oracle") {
  const auto params = small(8, 8, 11, 0, 1, 4);
  const auto mask = render_shape_mask({RectangleShape{{2, 2}, 3, 3}, 8, 8});
  const auto f = encode_mask_frame(mask, validate_params(params), 3);
  const auto want =
      oracle::encode_mask({mask.bits().begin(), mask.bits().end()}, to_oracle(params));
  CHECK(plane(f) == want[3]);
}

TEST_CASE("degenerate masks are rejected") {
  const auto p = validate_params(small(8, 8, 0));
  CHECK(code_of([&] { encode_mask_animation(ContentMask(8, 8, std::vector<std::uint8_t>(64, 1)), p); }) ==
        ErrorCode::DegenerateMask);
  CHECK(code_of([&] { encode_mask_animation(ContentMask::empty(8, 8), p); }) ==
        ErrorCode::DegenerateMask);
  CHECK(code_of([&] { encode_mask_animation(ContentMask::empty(4, 4), p); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("depth encoder equals the straight-line oracle") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> depth(0, 255);
  for (auto [w, h] : {std::pair{8, 8}, {17, 13}}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto params = small(w, h, seed, 1.0, 2.0, 7);
      std::vector<FrameBuffer> frames;
      std::vector<oracle::Plane> raw;
      for (int k = 0; k < 3; ++k) {
        oracle::Plane d(static_cast<std::size_t>(w) * h);
        for (auto& v : d) v = static_cast<std::uint8_t>(depth(rng));
        frames.emplace_back(w, h, d);
        raw.push_back(d);
      }
      const DepthThresholds th{64, 200};
      const auto seq = encode_depth_animation(DepthSequence(frames), th, validate_params(params));
      const auto want = oracle::encode_depth(raw, th.lower, th.upper, to_oracle(params));
      REQUIRE(seq.size() == want.size());
      for (std::size_t t = 0; t < want.size(); ++t) CHECK(plane(seq[t]) == want[t]);
    }
  }
}

TEST_CASE("constant depth inside the band scrolls the whole pattern") {
  const auto params = small(4, 4, 9, 0, 1, 4);
  const DepthSequence d({FrameBuffer(4, 4, 100)});
  const auto seq = encode_depth_animation(d, {50, 150}, validate_params(params));
  const auto n = generate_stream_noise(4, 4, 1, 0.5, 9, kBackgroundStream);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) CHECK(seq[2].at(x, y) == n.sample_wrapped(x, y + 2));
  }
}

TEST_CASE("empty depth band leaves every frame equal to the pattern") {
  const auto params = small(8, 8, 2, 0, 1, 5);
  const DepthSequence d({FrameBuffer(8, 8, 200)});
  const auto seq = encode_depth_animation(d, {255, 255}, validate_params(params));
  const auto n = generate_stream_noise(8, 8, 1, 0.5, 2, kBackgroundStream);
  for (const auto& f : seq.frames()) CHECK(f == n.frame());
}

TEST_CASE("depth thresholds are validated") {
  const auto p = validate_params(small(4, 4, 0));
  const DepthSequence d({FrameBuffer(4, 4, 1)});
  CHECK(code_of([&] { encode_depth_animation(d, {200, 100}, p); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { encode_depth_animation(DepthSequence({FrameBuffer(2, 2)}), {0, 255}, p); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("depth frames are stretched by nearest index") {
  CHECK(depth_frame_index(0, 3, 10) == 0);
  CHECK(depth_frame_index(4, 3, 10) == 1);
  CHECK(depth_frame_index(9, 3, 10) == 2);
  CHECK(depth_frame_index(5, 20, 10) == 10);
  CHECK(depth_frame_index(9, 1, 10) == 0);
}

TEST_CASE("periodicity when the velocity divides the height") {
  const auto params = small(12, 12, 4, 0, 3, 10);
  std::mt19937 rng(2);
  const auto seq = encode_mask_animation(random_mask(12, 12, rng), validate_params(params));
  CHECK(seq[0] == seq[4]);
  CHECK(seq[1] == seq[5]);
}

TEST_CASE("bit purity and determinism") {
  const auto params = validate_params(small(32, 24, 8, 1, 2, 6, 2));
  const auto mask = render_shape_mask({CircleShape{{16, 12}, 6}, 32, 24});
  const auto a = encode_mask_animation(mask, params);
  const auto b = encode_mask_animation(mask, params);
  CHECK(a.same_frames(b));
  for (const auto& f : a.frames()) {
    for (auto v : f.pixels()) CHECK((v == 0 || v == 255));
  }
  REQUIRE(a.params().has_value());
  CHECK(*a.params() == params.params());
}

TEST_CASE("single-frame secrecy on random shapes") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> c(80, 176), r(30, 70);
  for (int i = 0; i < 10; ++i) {
    const auto mask = render_shape_mask({CircleShape{{c(rng), c(rng)}, r(rng)}, 256, 256});
    auto params = small(256, 256, static_cast<std::uint64_t>(i), 0, 3, 4);
    const auto seq = encode_mask_animation(mask, validate_params(params));
    const std::vector<std::uint8_t> bits(mask.bits().begin(), mask.bits().end());
    for (const auto& f : seq.frames()) {
      CHECK(std::abs(oracle::point_biserial(plane(f), bits)) < 0.05);
    }
  }
}

TEST_CASE("frame sequences validate their frames") {
  CHECK(code_of([] { FrameSequence({}, 30); }) == ErrorCode::TooFewFrames);
  CHECK(code_of([] { FrameSequence({FrameBuffer(2, 2)}, 0); }) == ErrorCode::InvalidFps);
  CHECK(code_of([] { FrameSequence({FrameBuffer(2, 2), FrameBuffer(4, 2)}, 30); }) ==
        ErrorCode::MixedDimensions);
}
