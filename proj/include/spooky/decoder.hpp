#pragma once

#include <optional>
#include <span>
#include <string>

#include "spooky/core_types.hpp"
#include "spooky/snr_metrics.hpp"

namespace spooky {

/// Time-averaged motion boundary strength; same kernel as the basic SNR.
ScalarMap motion_boundary_map(std::span<const FlowField> flows, int border);

/// The coherence map used by the temporal coherence SNR.
ScalarMap coherence_decode_map(std::span<const FlowField> flows, const MetricConfig& cfg);

enum class ThresholdRule { Percentile, Bimodal };

struct MaskEstimateOptions {
  ThresholdRule rule = ThresholdRule::Percentile;
  double percentile = 90.0;
  int closing_iterations = 2;  ///< 3x3 dilations followed by as many erosions
  /// Components at least this fraction of the largest one's area are kept
  /// too; 1 keeps only the largest.
  double min_component_fraction = 0.2;
};

/// Segmentation result plus everything needed to audit how it was obtained.
struct MaskEstimate {
  ContentMask mask;
  ThresholdRule rule = ThresholdRule::Percentile;
  double percentile = 90.0;
  double threshold = 0.0;
  int closing_iterations = 2;
  int structuring_element = 3;
  std::size_t edge_pixels = 0;   ///< pixels above the threshold
  std::size_t components = 0;    ///< connected regions after filling
  std::size_t kept_components = 0;
  double min_component_fraction = 1.0;
  std::size_t region_pixels = 0;
  double mean_coherence_inside = 0.0;
  double mean_coherence_outside = 0.0;
};

/// Threshold the boundary map (keep values above the threshold), close it,
/// fill enclosed holes and keep the largest 8-connected region together with
/// any region of comparable size. The percentile is taken over the pixels
/// inside the map's border band. Only flow-derived maps are consulted; the
/// coherence map feeds the audit statistics.
/// Throws NoRegionFound when nothing exceeds the threshold.
MaskEstimate estimate_mask(const ScalarMap& boundary, const ScalarMap& coherence,
                           const MaskEstimateOptions& opts = {});

struct OverlayStyle {
  std::array<std::uint8_t, 3> color{0, 128, 128};
  double opacity = 0.5;
};

/// out = round((1 - a) * base + a * color) per channel, a = opacity on mask
/// pixels and 0 elsewhere.
RgbImage render_overlay(const FrameBuffer& base, const ContentMask& layer,
                        const OverlayStyle& style);
/// As above with a = opacity * value / max(value).
RgbImage render_overlay(const FrameBuffer& base, const ScalarMap& layer,
                        const OverlayStyle& style);

/// Map normalised to 0..255 for viewing.
FrameBuffer map_to_frame(const ScalarMap& m);

struct DecodeResult {
  ScalarMap boundary;
  ScalarMap coherence;
  std::optional<MaskEstimate> estimate;  ///< empty when the video is contentless
};

DecodeResult decode_video(const FrameSequence& seq, const FlowOptions& flow = {},
                          const MetricConfig& cfg = {}, const MaskEstimateOptions& opts = {});
DecodeResult decode_from_stats(const FlowStats& stats, const MetricConfig& cfg,
                               const MaskEstimateOptions& opts = {});

}  // namespace spooky
