#include "spooky/noise.hpp"

#include <algorithm>
#include <string>

namespace spooky {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamMultiplier = 0xD1B54A32D192ED03ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(seed ^ ((stream + 1) * kStreamMultiplier));
}

std::uint64_t stream_draw(std::uint64_t key, std::uint64_t index) noexcept {
  return mix64(key + (index + 1) * kGoldenGamma);
}

double unit_interval(std::uint64_t draw) noexcept {
  return static_cast<double>(draw >> 11) * 0x1.0p-53;
}

NoisePattern generate_noise(int width, int height, int block_size, double density,
                            std::uint64_t seed) {
  if (width < 2 || height < 2) {
    throw Error(ErrorCode::ZeroDimension, "noise pattern needs at least 2x2 pixels");
  }
  if (block_size < 1 || block_size > std::min(width, height)) {
    throw Error(ErrorCode::InvalidBlockSize,
                "block size " + std::to_string(block_size) + " outside [1, min(w,h)]",
                "block_size");
  }
  if (!(density >= 0.0 && density <= 1.0)) {
    throw Error(ErrorCode::InvalidDensity, "density must lie in [0,1]", "density");
  }

  const int blocks_x = (width + block_size - 1) / block_size;
  const int blocks_y = (height + block_size - 1) / block_size;
  std::vector<std::uint8_t> block_white(static_cast<std::size_t>(blocks_x) * blocks_y);
  for (std::size_t i = 0; i < block_white.size(); ++i) {
    block_white[i] = unit_interval(stream_draw(seed, i)) < density ? 255 : 0;
  }

  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const std::size_t brow = static_cast<std::size_t>(y / block_size) * blocks_x;
    for (int x = 0; x < width; ++x) {
      px[static_cast<std::size_t>(y) * width + x] = block_white[brow + x / block_size];
    }
  }

  // Tileability: last row <- first row, then last column <- first column.
  std::copy_n(px.begin(), width, px.begin() + static_cast<std::ptrdiff_t>(height - 1) * width);
  for (int y = 0; y < height; ++y) {
    auto* row = px.data() + static_cast<std::size_t>(y) * width;
    row[width - 1] = row[0];
  }

  return NoisePattern(FrameBuffer(width, height, std::move(px)), block_size, density, seed);
}

NoisePattern generate_stream_noise(int width, int height, int block_size, double density,
                                   std::uint64_t video_seed, std::uint64_t stream) {
  return generate_noise(width, height, block_size, density, stream_key(video_seed, stream));
}

std::uint8_t sample_wrapped(const NoisePattern& p, int x, long long y_offset) noexcept {
  return p.sample_wrapped(x, y_offset);
}

}  // namespace spooky
