#pragma once

// Value types shared by every stage of the toolkit: frames, masks, depth
// sequences, flow fields and encoding parameters. All of them validate their
// invariants on construction and are immutable afterwards.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spooky {

enum class ErrorCode {
  InvalidArgument,
  ZeroVelocity,
  NonPositiveDuration,
  ZeroDimension,
  InvalidFps,
  InvalidBlockSize,
  InvalidDensity,
  OutOfCanvas,
  DegenerateShape,
  EmptyText,
  UnsupportedGlyph,
  TextTooLarge,
  UnreadableImage,
  EmptyMask,
  MixedDimensions,
  EmptyDirectory,
  DimensionMismatch,
  DegenerateMask,
  FrameTooSmall,
  TooFewFrames,
  ZeroNoiseVariance,
  ZeroWeightedNoise,
  DegenerateCoherence,
  EmptyRegion,
  NoRegionFound,
  UnknownVideoId,
  EmptyInput,
  NoRatings,
  InsufficientBins,
  OddDimensions,
  SinkFailure,
  BadHeader,
  TruncatedFrame,
  UnsupportedChromaTag,
  IoFailure,
  SchemaViolation,
  DuplicateVideoId,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure in the library is reported as an Error carrying a code and,
/// for schema or parameter problems, the path of the offending field.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

/// Single grayscale frame, row-major, one byte per pixel.
class FrameBuffer {
 public:
  FrameBuffer(int width, int height, std::vector<std::uint8_t> pixels);
  FrameBuffer(int width, int height, std::uint8_t fill = 0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  std::uint8_t at(int x, int y) const noexcept {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<const std::uint8_t> row(int y) const noexcept {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_,
            static_cast<std::size_t>(width_)};
  }

  friend bool operator==(const FrameBuffer&, const FrameBuffer&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

/// Binary content mask; true marks foreground.
class ContentMask {
 public:
  ContentMask(int width, int height, std::vector<std::uint8_t> bits);

  static ContentMask empty(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool at(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  /// One byte per pixel, 0 or 1.
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t count() const noexcept;
  bool has_foreground_and_background() const noexcept;

  friend bool operator==(const ContentMask&, const ContentMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

double intersection_over_union(const ContentMask& a, const ContentMask& b);

class DepthSequence {
 public:
  explicit DepthSequence(std::vector<FrameBuffer> frames);

  int width() const noexcept { return frames_.front().width(); }
  int height() const noexcept { return frames_.front().height(); }
  std::size_t size() const noexcept { return frames_.size(); }
  const FrameBuffer& operator[](std::size_t i) const { return frames_[i]; }
  std::span<const FrameBuffer> frames() const noexcept { return frames_; }

 private:
  std::vector<FrameBuffer> frames_;
};

/// Dense displacement field between two frames, in pixels per frame.
/// Convention: a(x, y) ~ b(x + u, y + v).
class FlowField {
 public:
  FlowField(int width, int height, std::vector<float> u, std::vector<float> v);
  static FlowField zero(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const float> u() const noexcept { return u_; }
  std::span<const float> v() const noexcept { return v_; }
  float u_at(int x, int y) const noexcept {
    return u_[static_cast<std::size_t>(y) * width_ + x];
  }
  float v_at(int x, int y) const noexcept {
    return v_[static_cast<std::size_t>(y) * width_ + x];
  }

 private:
  int width_;
  int height_;
  std::vector<float> u_;
  std::vector<float> v_;
};

/// Interleaved 8-bit RGB image, used only for visual overlays.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::array<std::uint8_t, 3> at(int x, int y) const noexcept {
    const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct Velocity {
  double vx = 0.0;
  double vy = 3.0;
  friend bool operator==(const Velocity&, const Velocity&) = default;
};

struct EncodingParams {
  int width = 960;
  int height = 540;
  int fps = 30;
  double duration_s = 4.0;
  Velocity velocity{};
  int block_size = 1;
  double density = 0.5;
  std::uint64_t seed = 0;

  friend bool operator==(const EncodingParams&, const EncodingParams&) = default;
};

struct ParamViolation {
  ErrorCode code;
  std::string field;
  std::string message;
};

/// All invariant violations of `p`, in field order. Empty when valid.
std::vector<ParamViolation> check_params(const EncodingParams& p);

/// Parameters that passed validation, with the derived frame count attached.
class ValidatedParams {
 public:
  const EncodingParams& params() const noexcept { return params_; }
  int frame_count() const noexcept { return frame_count_; }
  int width() const noexcept { return params_.width; }
  int height() const noexcept { return params_.height; }

 private:
  friend ValidatedParams validate_params(const EncodingParams& p);
  ValidatedParams(EncodingParams p, int frames) : params_(p), frame_count_(frames) {}

  EncodingParams params_;
  int frame_count_;
};

/// Throws Error with the first violation's code; the message lists all of them.
ValidatedParams validate_params(const EncodingParams& p);

}  // namespace spooky
