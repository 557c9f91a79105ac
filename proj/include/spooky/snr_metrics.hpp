#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spooky/core_types.hpp"
#include "spooky/encoder.hpp"
#include "spooky/optical_flow.hpp"

namespace spooky {

enum class MaskSource { GroundTruth, Estimated };

struct MetricConfig {
  double f0 = 0.1;       ///< CSF peak frequency, cycles/pixel
  double tau = 0.5;      ///< flow magnitude threshold, pixels/frame
  int local_window = 5;  ///< odd edge of the local-variance neighbourhood
  /// Pixels skipped at every frame edge; defaults to border_band(FlowOptions).
  std::optional<int> border_exclude;
  MaskSource mask_source = MaskSource::GroundTruth;
};

void validate(const MetricConfig& c);

/// Border actually applied: the configured value, or the flow band, and at
/// least 1 so that central differences stay inside the frame.
int effective_border(const MetricConfig& c, const FlowOptions& flow = {});

enum class MapKind { BoundaryStrength, Coherence };

/// Per-pixel non-negative map with the frame's dimensions. Values inside the
/// excluded border band are zero.
struct ScalarMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  MapKind kind = MapKind::BoundaryStrength;
  int border = 0;  ///< width of the zeroed edge band

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Running per-pixel sums over a stream of flow fields. Every metric and
/// decoder map is a function of these sums, so a video's flows never need to
/// be held in memory at once.
class FlowStats {
 public:
  FlowStats(int width, int height, int border);

  void add(const FlowField& f);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int border() const noexcept { return border_; }
  std::size_t flow_count() const noexcept { return count_; }
  bool interior(int x, int y) const noexcept {
    return x >= border_ && y >= border_ && x < width_ - border_ && y < height_ - border_;
  }
  std::size_t interior_pixels() const noexcept;

  /// Sum over interior pixels and flows of the squared Frobenius norm of the
  /// flow Jacobian (central differences).
  double jacobian_energy() const noexcept { return jacobian_energy_; }

  // Per-pixel sums over flows.
  const std::vector<double>& sum_u() const noexcept { return sum_u_; }
  const std::vector<double>& sum_v() const noexcept { return sum_v_; }
  const std::vector<double>& sum_sq() const noexcept { return sum_sq_; }
  const std::vector<double>& sum_dir_x() const noexcept { return sum_dir_x_; }
  const std::vector<double>& sum_dir_y() const noexcept { return sum_dir_y_; }
  const std::vector<double>& sum_mag() const noexcept { return sum_mag_; }
  const std::vector<double>& sum_jacobian_norm() const noexcept { return sum_jac_; }

 private:
  int width_;
  int height_;
  int border_;
  std::size_t count_ = 0;
  double jacobian_energy_ = 0.0;
  std::vector<double> sum_u_, sum_v_, sum_sq_, sum_dir_x_, sum_dir_y_, sum_mag_, sum_jac_;
};

FlowStats accumulate(std::span<const FlowField> flows, int border);

/// Time-averaged Frobenius norm of the flow Jacobian.
ScalarMap boundary_strength(const FlowStats& s);

/// C = exp(-circular variance of directions) where the time-mean magnitude
/// exceeds tau, else 0. Zero-length vectors enter the direction mean as zero.
ScalarMap coherence_map(const FlowStats& s, const MetricConfig& cfg);

/// 10 log10(P_S / P_N). -inf when P_S is 0; throws ZeroNoiseVariance for a
/// constant first frame.
double basic_snr(const FlowStats& s, const FrameBuffer& first_frame);
double basic_snr(std::span<const FlowField> flows, const FrameBuffer& first_frame,
                 const MetricConfig& cfg);

/// Contrast-sensitivity weight f * exp(-f / f0).
double csf_weight(double f, double f0) noexcept;

/// 10 log10(|H(B) W|^2 / |H(N) W|^2) on zero-padded power-of-two grids.
double perceptual_snr(const ScalarMap& boundary, const FrameBuffer& noise_frame,
                      const MetricConfig& cfg);
double perceptual_snr(std::span<const FlowField> flows, const FrameBuffer& noise_frame,
                      const MetricConfig& cfg);

/// 10 log10(Var(C) / mean local variance of C). Throws DegenerateCoherence
/// when C is constant over the interior.
double temporal_coherence_snr(const FlowStats& s, const MetricConfig& cfg);
double temporal_coherence_snr(std::span<const FlowField> flows, const MetricConfig& cfg);

/// 10 log10(|mu_M - mu_B|^2 / ((var_M + var_B) / 2)), pooled over time and
/// interior pixels. -inf when the means coincide, +inf when both regions
/// move rigidly with different means. Throws EmptyRegion.
double motion_contrast_snr(const FlowStats& s, const ContentMask& mask);
double motion_contrast_snr(std::span<const FlowField> flows, const ContentMask& mask,
                           const MetricConfig& cfg);

enum class MetricStatus { Finite, NegativeInfinity, PositiveInfinity, NotApplicable };

struct MetricValue {
  MetricStatus status = MetricStatus::NotApplicable;
  double db = 0.0;
  std::string note;

  static MetricValue from_db(double v);
  static MetricValue not_applicable(std::string why);
  bool finite() const noexcept { return status == MetricStatus::Finite; }
};

struct SnrReport {
  MetricValue basic;
  MetricValue perceptual;
  MetricValue temporal_coherence;
  MetricValue motion_contrast;
  /// Unweighted mean of the finite components. A toolkit convention.
  MetricValue combined;
  bool contentless = false;
  MaskSource mask_source_used = MaskSource::GroundTruth;
  std::size_t frame_count = 0;
  int width = 0;
  int height = 0;
  int fps = 0;
  std::optional<EncodingParams> params;
  MetricConfig config;
  FlowOptions flow;
  std::vector<std::string> notes;
};

MetricValue combine(const std::vector<MetricValue>& parts);

/// Flows, all four metrics and the combined value for one video. Without a
/// ground-truth mask the estimated mask is used and the report says so.
SnrReport analyze_video(const FrameSequence& seq, const std::optional<ContentMask>& mask,
                        const MetricConfig& cfg = {}, const FlowOptions& flow = {});

}  // namespace spooky
