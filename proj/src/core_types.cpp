#include "spooky/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spooky {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroVelocity: return "ZeroVelocity";
    case ErrorCode::NonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::ZeroDimension: return "ZeroDimension";
    case ErrorCode::InvalidFps: return "InvalidFps";
    case ErrorCode::InvalidBlockSize: return "InvalidBlockSize";
    case ErrorCode::InvalidDensity: return "InvalidDensity";
    case ErrorCode::OutOfCanvas: return "OutOfCanvas";
    case ErrorCode::DegenerateShape: return "DegenerateShape";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::UnsupportedGlyph: return "UnsupportedGlyph";
    case ErrorCode::TextTooLarge: return "TextTooLarge";
    case ErrorCode::UnreadableImage: return "UnreadableImage";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::MixedDimensions: return "MixedDimensions";
    case ErrorCode::EmptyDirectory: return "EmptyDirectory";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::FrameTooSmall: return "FrameTooSmall";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::ZeroNoiseVariance: return "ZeroNoiseVariance";
    case ErrorCode::ZeroWeightedNoise: return "ZeroWeightedNoise";
    case ErrorCode::DegenerateCoherence: return "DegenerateCoherence";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::NoRegionFound: return "NoRegionFound";
    case ErrorCode::UnknownVideoId: return "UnknownVideoId";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoRatings: return "NoRatings";
    case ErrorCode::InsufficientBins: return "InsufficientBins";
    case ErrorCode::OddDimensions: return "OddDimensions";
    case ErrorCode::SinkFailure: return "SinkFailure";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::TruncatedFrame: return "TruncatedFrame";
    case ErrorCode::UnsupportedChromaTag: return "UnsupportedChromaTag";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateVideoId: return "DuplicateVideoId";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string field)
    : std::runtime_error(message), code_(code), field_(std::move(field)) {}

namespace {

void require_dimensions(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::ZeroDimension,
                "dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

std::size_t area(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

FrameBuffer::FrameBuffer(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  require_dimensions(width, height);
  if (pixels_.size() != area(width, height)) {
    throw Error(ErrorCode::DimensionMismatch, "pixel count does not match " +
                                                  std::to_string(width) + "x" +
                                                  std::to_string(height));
  }
}

FrameBuffer::FrameBuffer(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  require_dimensions(width, height);
  pixels_.assign(area(width, height), fill);
}

ContentMask::ContentMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  require_dimensions(width, height);
  if (bits_.size() != area(width, height)) {
    throw Error(ErrorCode::DimensionMismatch, "mask bit count does not match dimensions");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

ContentMask ContentMask::empty(int width, int height) {
  require_dimensions(width, height);
  return ContentMask(width, height, std::vector<std::uint8_t>(area(width, height), 0));
}

std::size_t ContentMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool ContentMask::has_foreground_and_background() const noexcept {
  const auto n = count();
  return n > 0 && n < bits_.size();
}

double intersection_over_union(const ContentMask& a, const ContentMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::DimensionMismatch, "IoU needs masks of equal dimensions");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto ab = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += ab[i] & bb[i];
    uni += ab[i] | bb[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

DepthSequence::DepthSequence(std::vector<FrameBuffer> frames) : frames_(std::move(frames)) {
  if (frames_.empty()) {
    throw Error(ErrorCode::EmptyDirectory, "depth sequence has no frames");
  }
  for (const auto& f : frames_) {
    if (f.width() != frames_.front().width() || f.height() != frames_.front().height()) {
      throw Error(ErrorCode::MixedDimensions, "depth frames differ in size");
    }
  }
}

FlowField::FlowField(int width, int height, std::vector<float> u, std::vector<float> v)
    : width_(width), height_(height), u_(std::move(u)), v_(std::move(v)) {
  require_dimensions(width, height);
  if (u_.size() != area(width, height) || v_.size() != area(width, height)) {
    throw Error(ErrorCode::DimensionMismatch, "flow component size does not match dimensions");
  }
  auto finite = [](float f) { return std::isfinite(f); };
  if (!std::all_of(u_.begin(), u_.end(), finite) || !std::all_of(v_.begin(), v_.end(), finite)) {
    throw Error(ErrorCode::InvalidArgument, "flow contains non-finite values");
  }
}

FlowField FlowField::zero(int width, int height) {
  require_dimensions(width, height);
  return FlowField(width, height, std::vector<float>(area(width, height), 0.0f),
                   std::vector<float>(area(width, height), 0.0f));
}

std::vector<ParamViolation> check_params(const EncodingParams& p) {
  std::vector<ParamViolation> out;
  if (p.width <= 0 || p.height <= 0) {
    out.push_back({ErrorCode::ZeroDimension, "size", "width and height must be positive"});
  }
  if (p.fps < 1) {
    out.push_back({ErrorCode::InvalidFps, "fps", "fps must be at least 1"});
  }
  if (!(p.duration_s > 0.0) || !std::isfinite(p.duration_s)) {
    out.push_back({ErrorCode::NonPositiveDuration, "duration_s", "duration must be positive"});
  } else if (p.fps >= 1 && std::llround(p.fps * p.duration_s) < 2) {
    out.push_back({ErrorCode::NonPositiveDuration, "duration_s",
                   "fps x duration must give at least 2 frames"});
  }
  if (!std::isfinite(p.velocity.vx) || !std::isfinite(p.velocity.vy)) {
    out.push_back({ErrorCode::InvalidArgument, "velocity", "velocity must be finite"});
  } else if (std::abs(p.velocity.vx) + std::abs(p.velocity.vy) == 0.0) {
    out.push_back({ErrorCode::ZeroVelocity, "velocity",
                   "zero velocity leaves the content permanently invisible"});
  }
  if (p.block_size < 1 || p.block_size > 3) {
    out.push_back({ErrorCode::InvalidBlockSize, "block_size", "block size must be 1, 2 or 3"});
  }
  if (!(p.density >= 0.0 && p.density <= 1.0)) {
    out.push_back({ErrorCode::InvalidDensity, "density", "density must lie in [0,1]"});
  }
  return out;
}

ValidatedParams validate_params(const EncodingParams& p) {
  const auto violations = check_params(p);
  if (!violations.empty()) {
    std::string msg;
    for (const auto& v : violations) {
      if (!msg.empty()) msg += "; ";
      msg += v.field + ": " + v.message;
    }
    throw Error(violations.front().code, msg, violations.front().field);
  }
  return ValidatedParams(p, static_cast<int>(std::llround(p.fps * p.duration_s)));
}

}  // namespace spooky
