#pragma once

#include <cstdint>

#include "spooky/core_types.hpp"

namespace spooky {

/// Sub-stream keys used to derive independent patterns from one video seed.
inline constexpr std::uint64_t kBackgroundStream = 0;
inline constexpr std::uint64_t kForegroundStream = 1;

/// Tileable binary speckle texture. Pixels are 0 or 255, grouped into
/// block_size x block_size cells, with the last row and column copied from
/// the first so that wrapped sampling has no seam.
class NoisePattern {
 public:
  int width() const noexcept { return frame_.width(); }
  int height() const noexcept { return frame_.height(); }
  int block_size() const noexcept { return block_size_; }
  double density() const noexcept { return density_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const FrameBuffer& frame() const noexcept { return frame_; }
  std::uint8_t at(int x, int y) const noexcept { return frame_.at(x, y); }

  /// Wrapped lookup; offsets may be negative or exceed the pattern size.
  std::uint8_t sample_wrapped(long long x, long long y) const noexcept {
    const long long w = frame_.width();
    const long long h = frame_.height();
    const auto xm = ((x % w) + w) % w;
    const auto ym = ((y % h) + h) % h;
    return frame_.at(static_cast<int>(xm), static_cast<int>(ym));
  }

 private:
  friend NoisePattern generate_noise(int, int, int, double, std::uint64_t);
  NoisePattern(FrameBuffer f, int b, double d, std::uint64_t s)
      : frame_(std::move(f)), block_size_(b), density_(d), seed_(s) {}

  FrameBuffer frame_;
  int block_size_;
  double density_;
  std::uint64_t seed_;
};

/// SplitMix64 output function.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Key of sub-stream `stream` under `seed`:
/// mix64(seed ^ ((stream + 1) * 0xD1B54A32D192ED03)).
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) noexcept;

/// The i-th 64-bit draw of the counter-based stream with key `key`.
/// draw(key, i) = mix64(key + (i + 1) * 0x9E3779B97F4A7C15)
std::uint64_t stream_draw(std::uint64_t key, std::uint64_t index) noexcept;

/// Uniform double in [0,1) from the top 53 bits of a draw.
double unit_interval(std::uint64_t draw) noexcept;

/// One draw per block in row-major block order; a block is white when its
/// uniform value is below `density`. `seed` here is already a stream key.
NoisePattern generate_noise(int width, int height, int block_size, double density,
                            std::uint64_t seed);

/// Pattern for sub-stream `stream` of a video seed.
NoisePattern generate_stream_noise(int width, int height, int block_size, double density,
                                   std::uint64_t video_seed, std::uint64_t stream);

/// Wrapped sample at column x (taken mod width) and a signed vertical offset.
std::uint8_t sample_wrapped(const NoisePattern& p, int x, long long y_offset) noexcept;

}  // namespace spooky
