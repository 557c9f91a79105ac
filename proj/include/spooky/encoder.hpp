#pragma once

#include <optional>
#include <vector>

#include "spooky/core_types.hpp"

namespace spooky {

/// Ordered, equally sized frames plus their playback rate. Sequences read
/// back from disk may not carry the parameters that produced them.
class FrameSequence {
 public:
  FrameSequence(std::vector<FrameBuffer> frames, int fps,
                std::optional<EncodingParams> params = std::nullopt);

  int fps() const noexcept { return fps_; }
  int width() const noexcept { return frames_.front().width(); }
  int height() const noexcept { return frames_.front().height(); }
  std::size_t size() const noexcept { return frames_.size(); }
  const FrameBuffer& operator[](std::size_t i) const { return frames_[i]; }
  std::span<const FrameBuffer> frames() const noexcept { return frames_; }
  const std::optional<EncodingParams>& params() const noexcept { return params_; }

  /// Frame equality only; parameters are provenance.
  bool same_frames(const FrameSequence& other) const { return frames_ == other.frames_; }

 private:
  std::vector<FrameBuffer> frames_;
  int fps_;
  std::optional<EncodingParams> params_;
};

struct DepthThresholds {
  int lower = 0;
  int upper = 255;
};

/// Integer displacement applied at frame t: floor(v * t) per axis.
struct FrameOffset {
  long long dx;
  long long dy;
};
FrameOffset frame_offset(const Velocity& v, int t) noexcept;

/// Foreground samples the foreground pattern at (x + dx, y + dy), background
/// samples the background pattern at (x - dx, y - dy), both wrapped.
FrameSequence encode_mask_animation(const ContentMask& mask, const ValidatedParams& p);

/// Renders only frame t of the mask animation.
FrameBuffer encode_mask_frame(const ContentMask& mask, const ValidatedParams& p, int t);

/// Depth frame used for output frame t when stretching `depth_frames` over
/// `output_frames`: floor(t * depth_frames / output_frames).
std::size_t depth_frame_index(int t, std::size_t depth_frames, int output_frames) noexcept;

/// Pixels whose depth lies in [lower, upper] scroll with the velocity; all
/// others show the same pattern unshifted.
FrameSequence encode_depth_animation(const DepthSequence& depth, const DepthThresholds& th,
                                     const ValidatedParams& p);

}  // namespace spooky
