#include "spooky/encoder.hpp"

#include <cmath>

#include "parallel.hpp"
#include "spooky/noise.hpp"

namespace spooky {

FrameSequence::FrameSequence(std::vector<FrameBuffer> frames, int fps,
                             std::optional<EncodingParams> params)
    : frames_(std::move(frames)), fps_(fps), params_(std::move(params)) {
  if (frames_.empty()) throw Error(ErrorCode::TooFewFrames, "sequence has no frames");
  if (fps_ < 1) throw Error(ErrorCode::InvalidFps, "fps must be at least 1", "fps");
  for (const auto& f : frames_) {
    if (f.width() != frames_.front().width() || f.height() != frames_.front().height()) {
      throw Error(ErrorCode::MixedDimensions, "frames differ in size");
    }
  }
}

FrameOffset frame_offset(const Velocity& v, int t) noexcept {
  return {static_cast<long long>(std::floor(v.vx * t)),
          static_cast<long long>(std::floor(v.vy * t))};
}

namespace {

long long wrap(long long i, long long n) noexcept { return ((i % n) + n) % n; }

// Copies row `src_y` of `pattern` into dst, starting at column offset `dx`.
void copy_wrapped_row(const FrameBuffer& pattern, long long src_y, long long dx,
                      std::uint8_t* dst) {
  const int w = pattern.width();
  const auto row = pattern.row(static_cast<int>(wrap(src_y, pattern.height())));
  long long sx = wrap(dx, w);
  for (int x = 0; x < w; ++x) {
    dst[x] = row[static_cast<std::size_t>(sx)];
    if (++sx == w) sx = 0;
  }
}

struct MaskPatterns {
  NoisePattern background;
  NoisePattern foreground;
};

MaskPatterns mask_patterns(const ValidatedParams& p) {
  const auto& e = p.params();
  return {generate_stream_noise(e.width, e.height, e.block_size, e.density, e.seed,
                                kBackgroundStream),
          generate_stream_noise(e.width, e.height, e.block_size, e.density, e.seed,
                                kForegroundStream)};
}

void check_mask(const ContentMask& mask, const ValidatedParams& p) {
  if (mask.width() != p.width() || mask.height() != p.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask dimensions differ from the video size",
                "mask");
  }
  if (!mask.has_foreground_and_background()) {
    throw Error(ErrorCode::DegenerateMask,
                "mask needs both foreground and background for opposing motion", "mask");
  }
}

FrameBuffer mask_frame(const ContentMask& mask, const MaskPatterns& pats, const Velocity& vel,
                       int t) {
  const int w = mask.width();
  const int h = mask.height();
  const auto off = frame_offset(vel, t);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
  std::vector<std::uint8_t> fg(static_cast<std::size_t>(w));
  std::vector<std::uint8_t> bg(static_cast<std::size_t>(w));
  const auto bits = mask.bits();
  for (int y = 0; y < h; ++y) {
    copy_wrapped_row(pats.foreground.frame(), y + off.dy, off.dx, fg.data());
    copy_wrapped_row(pats.background.frame(), y - off.dy, -off.dx, bg.data());
    const std::size_t base = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      px[base + x] = bits[base + x] ? fg[static_cast<std::size_t>(x)]
                                    : bg[static_cast<std::size_t>(x)];
    }
  }
  return FrameBuffer(w, h, std::move(px));
}

}  // namespace

FrameSequence encode_mask_animation(const ContentMask& mask, const ValidatedParams& p) {
  check_mask(mask, p);
  const auto pats = mask_patterns(p);
  const int n = p.frame_count();
  std::vector<std::optional<FrameBuffer>> slots(static_cast<std::size_t>(n));
  detail::parallel_for(static_cast<std::size_t>(n), [&](std::size_t t) {
    slots[t] = mask_frame(mask, pats, p.params().velocity, static_cast<int>(t));
  });
  std::vector<FrameBuffer> frames;
  frames.reserve(slots.size());
  for (auto& s : slots) frames.push_back(std::move(*s));
  return FrameSequence(std::move(frames), p.params().fps, p.params());
}

FrameBuffer encode_mask_frame(const ContentMask& mask, const ValidatedParams& p, int t) {
  check_mask(mask, p);
  return mask_frame(mask, mask_patterns(p), p.params().velocity, t);
}

std::size_t depth_frame_index(int t, std::size_t depth_frames, int output_frames) noexcept {
  const auto idx = static_cast<std::size_t>(t) * depth_frames /
                   static_cast<std::size_t>(output_frames);
  return std::min(idx, depth_frames - 1);
}

FrameSequence encode_depth_animation(const DepthSequence& depth, const DepthThresholds& th,
                                     const ValidatedParams& p) {
  if (depth.width() != p.width() || depth.height() != p.height()) {
    throw Error(ErrorCode::DimensionMismatch, "depth dimensions differ from the video size",
                "depth");
  }
  if (th.lower < 0 || th.upper > 255 || th.lower > th.upper) {
    throw Error(ErrorCode::InvalidArgument, "thresholds must satisfy 0 <= lower <= upper <= 255",
                "thresholds");
  }
  const auto& e = p.params();
  const auto pattern =
      generate_stream_noise(e.width, e.height, e.block_size, e.density, e.seed, kBackgroundStream);
  const int w = e.width;
  const int h = e.height;
  const int n = p.frame_count();

  std::vector<std::optional<FrameBuffer>> slots(static_cast<std::size_t>(n));
  detail::parallel_for(static_cast<std::size_t>(n), [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    const auto& d = depth[depth_frame_index(t, depth.size(), n)];
    const auto off = frame_offset(e.velocity, t);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
    std::vector<std::uint8_t> moving(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
      copy_wrapped_row(pattern.frame(), y + off.dy, off.dx, moving.data());
      const auto still = pattern.frame().row(y);
      const auto drow = d.row(y);
      auto* dst = px.data() + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        const int dv = drow[static_cast<std::size_t>(x)];
        dst[x] = (dv >= th.lower && dv <= th.upper) ? moving[static_cast<std::size_t>(x)]
                                                    : still[static_cast<std::size_t>(x)];
      }
    }
    slots[ti] = FrameBuffer(w, h, std::move(px));
  });
  std::vector<FrameBuffer> frames;
  frames.reserve(slots.size());
  for (auto& s : slots) frames.push_back(std::move(*s));
  return FrameSequence(std::move(frames), e.fps, e);
}

}  // namespace spooky
