#include "spooky/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <deque>

namespace spooky {

ScalarMap motion_boundary_map(std::span<const FlowField> flows, int border) {
  return boundary_strength(accumulate(flows, border));
}

ScalarMap coherence_decode_map(std::span<const FlowField> flows, const MetricConfig& cfg) {
  validate(cfg);
  if (flows.size() < 2) throw Error(ErrorCode::TooFewFrames, "need at least 2 flow fields");
  return coherence_map(accumulate(flows, effective_border(cfg)), cfg);
}

namespace {

using Bits = std::vector<std::uint8_t>;

std::vector<double> interior_values(const ScalarMap& m) {
  const int b = m.border;
  std::vector<double> out;
  if (m.width <= 2 * b || m.height <= 2 * b) return out;
  out.reserve(static_cast<std::size_t>(m.width - 2 * b) * (m.height - 2 * b));
  for (int y = b; y < m.height - b; ++y) {
    for (int x = b; x < m.width - b; ++x) out.push_back(m.at(x, y));
  }
  return out;
}

double percentile_of(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(rank));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  const double lo = v[k];
  if (k + 1 >= v.size()) return lo;
  const double hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(k) + 1, v.end());
  return lo + (rank - static_cast<double>(k)) * (hi - lo);
}

// Otsu split over 256 bins spanning [0, max].
double bimodal_threshold(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mx = *std::max_element(v.begin(), v.end());
  if (mx <= 0.0) return 0.0;
  std::array<double, 256> hist{};
  for (double x : v) hist[std::min<std::size_t>(255, static_cast<std::size_t>(x / mx * 255.0))] += 1;
  const double total = static_cast<double>(v.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_i = 0;
  for (int i = 0; i < 255; ++i) {
    w0 += hist[i];
    sum0 += i * hist[i];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_i = i;
    }
  }
  return (best_i + 1) * mx / 255.0;
}

Bits morph3(const Bits& in, int w, int h, bool dilate) {
  Bits out(in.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool acc = !dilate;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const bool v = in[static_cast<std::size_t>(yy) * w + xx] != 0;
          acc = dilate ? (acc || v) : (acc && v);
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc ? 1 : 0;
    }
  }
  return out;
}

// Background reachable from the frame edge through 4-connected steps stays
// background; everything else becomes foreground.
Bits fill_holes(const Bits& in, int w, int h) {
  Bits outside(in.size(), 0);
  std::deque<std::size_t> queue;
  auto seed = [&](int x, int y) {
    const auto i = static_cast<std::size_t>(y) * w + x;
    if (!in[i] && !outside[i]) {
      outside[i] = 1;
      queue.push_back(i);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!queue.empty()) {
    const auto i = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  Bits out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = outside[i] ? 0 : 1;
  return out;
}

// Each band pixel joins whichever of its enclosed holes or the outside is
// nearer (4-connected BFS), which places the edge on the band's centreline.
// Band components that enclose nothing are kept whole.
Bits split_band(const Bits& band, const Bits& filled, int w, int h) {
  enum : std::uint8_t { Band = 0, Inside = 1, Outside = 2 };
  std::vector<std::uint8_t> owner(band.size(), Band);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < band.size(); ++i) {
    if (band[i]) continue;
    owner[i] = filled[i] ? Inside : Outside;
    queue.push_back(i);
  }
  while (!queue.empty()) {
    const auto i = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    auto visit = [&](int xx, int yy) {
      const auto j = static_cast<std::size_t>(yy) * w + xx;
      if (owner[j] == Band) {
        owner[j] = owner[i];
        queue.push_back(j);
      }
    };
    if (x > 0) visit(x - 1, y);
    if (x + 1 < w) visit(x + 1, y);
    if (y > 0) visit(x, y - 1);
    if (y + 1 < h) visit(x, y + 1);
  }

  // Band components with no adjacent hole stay whole.
  Bits out(band.size(), 0);
  std::vector<std::uint8_t> seen(band.size(), 0);
  std::vector<std::size_t> stack, members;
  for (std::size_t start = 0; start < band.size(); ++start) {
    if (!filled[start] || seen[start]) continue;
    members.clear();
    bool has_hole = false;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      members.push_back(i);
      has_hole = has_hole || !band[i];
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const auto j = static_cast<std::size_t>(yy) * w + xx;
          if (filled[j] && !seen[j]) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
      }
    }
    for (auto i : members) out[i] = has_hole ? owner[i] == Inside : 1;
  }
  return out;
}

// 8-connected components no smaller than `fraction` of the largest.
Bits keep_components(const Bits& in, int w, int h, double fraction, std::size_t& components,
                     std::size_t& kept) {
  std::vector<int> label(in.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < in.size(); ++start) {
    if (!in[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t n = 0;
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      ++n;
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const auto j = static_cast<std::size_t>(yy) * w + xx;
          if (in[j] && label[j] < 0) {
            label[j] = id;
            stack.push_back(j);
          }
        }
      }
    }
    sizes.push_back(n);
  }
  components = sizes.size();
  Bits out(in.size(), 0);
  if (sizes.empty()) return out;
  const auto largest = *std::max_element(sizes.begin(), sizes.end());
  std::vector<std::uint8_t> keep(sizes.size(), 0);
  kept = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] == largest || static_cast<double>(sizes[c]) >= fraction * largest) {
      keep[c] = 1;
      ++kept;
    }
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = label[i] >= 0 && keep[label[i]] ? 1 : 0;
  return out;
}

}  // namespace

MaskEstimate estimate_mask(const ScalarMap& boundary, const ScalarMap& coherence,
                           const MaskEstimateOptions& opts) {
  if (boundary.width != coherence.width || boundary.height != coherence.height) {
    throw Error(ErrorCode::DimensionMismatch, "boundary and coherence maps differ in size");
  }
  if (!(opts.min_component_fraction > 0.0 && opts.min_component_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "min_component_fraction must be in (0, 1]",
                "min_component_fraction");
  }
  if (opts.rule == ThresholdRule::Percentile && !(opts.percentile >= 0.0 && opts.percentile <= 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "percentile must be in [0, 100]", "percentile");
  }
  if (opts.closing_iterations < 0) {
    throw Error(ErrorCode::InvalidArgument, "closing_iterations must be >= 0",
                "closing_iterations");
  }
  const int w = boundary.width;
  const int h = boundary.height;

  MaskEstimate est{ContentMask::empty(w, h)};
  est.rule = opts.rule;
  est.percentile = opts.percentile;
  est.closing_iterations = opts.closing_iterations;
  est.min_component_fraction = opts.min_component_fraction;

  const auto values = interior_values(boundary);
  est.threshold = opts.rule == ThresholdRule::Percentile ? percentile_of(values, opts.percentile)
                                                         : bimodal_threshold(values);
  Bits bits(boundary.values.size(), 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (boundary.values[i] > est.threshold) {
      bits[i] = 1;
      ++est.edge_pixels;
    }
  }
  if (est.edge_pixels == 0) {
    throw Error(ErrorCode::NoRegionFound, "no boundary pixel exceeds the threshold");
  }
  for (int i = 0; i < opts.closing_iterations; ++i) bits = morph3(bits, w, h, true);
  for (int i = 0; i < opts.closing_iterations; ++i) bits = morph3(bits, w, h, false);
  const Bits filled = fill_holes(bits, w, h);
  bits = split_band(bits, filled, w, h);
  bits = keep_components(bits, w, h, opts.min_component_fraction, est.components,
                         est.kept_components);

  double in_sum = 0.0, out_sum = 0.0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) {
      ++est.region_pixels;
      in_sum += coherence.values[i];
    } else {
      out_sum += coherence.values[i];
    }
  }
  if (est.region_pixels == 0) {
    throw Error(ErrorCode::NoRegionFound, "segmentation produced an empty region");
  }
  est.mean_coherence_inside = in_sum / static_cast<double>(est.region_pixels);
  const auto rest = bits.size() - est.region_pixels;
  est.mean_coherence_outside = rest ? out_sum / static_cast<double>(rest) : 0.0;
  est.mask = ContentMask(w, h, std::move(bits));
  return est;
}

namespace {

std::uint8_t blend(std::uint8_t base, std::uint8_t color, double a) {
  return static_cast<std::uint8_t>(std::lround((1.0 - a) * base + a * color));
}

template <typename AlphaFn>
RgbImage overlay(const FrameBuffer& base, const OverlayStyle& style, AlphaFn alpha) {
  if (!(style.opacity >= 0.0 && style.opacity <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "opacity must be in [0, 1]", "opacity");
  }
  RgbImage img{base.width(), base.height(), {}};
  img.rgb.resize(base.size() * 3);
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      const double a = alpha(x, y);
      const auto i = (static_cast<std::size_t>(y) * base.width() + x) * 3;
      for (int c = 0; c < 3; ++c) img.rgb[i + c] = blend(base.at(x, y), style.color[c], a);
    }
  }
  return img;
}

}  // namespace

RgbImage render_overlay(const FrameBuffer& base, const ContentMask& layer,
                        const OverlayStyle& style) {
  if (layer.width() != base.width() || layer.height() != base.height()) {
    throw Error(ErrorCode::DimensionMismatch, "overlay layer differs from the base frame");
  }
  return overlay(base, style,
                 [&](int x, int y) { return layer.at(x, y) ? style.opacity : 0.0; });
}

RgbImage render_overlay(const FrameBuffer& base, const ScalarMap& layer,
                        const OverlayStyle& style) {
  if (layer.width != base.width() || layer.height != base.height()) {
    throw Error(ErrorCode::DimensionMismatch, "overlay layer differs from the base frame");
  }
  const double mx = layer.values.empty()
                        ? 0.0
                        : *std::max_element(layer.values.begin(), layer.values.end());
  return overlay(base, style, [&](int x, int y) {
    return mx > 0.0 ? style.opacity * layer.at(x, y) / mx : 0.0;
  });
}

FrameBuffer map_to_frame(const ScalarMap& m) {
  const double mx =
      m.values.empty() ? 0.0 : *std::max_element(m.values.begin(), m.values.end());
  std::vector<std::uint8_t> px(m.values.size(), 0);
  if (mx > 0.0) {
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = static_cast<std::uint8_t>(std::lround(255.0 * m.values[i] / mx));
    }
  }
  return FrameBuffer(m.width, m.height, std::move(px));
}

DecodeResult decode_from_stats(const FlowStats& stats, const MetricConfig& cfg,
                               const MaskEstimateOptions& opts) {
  DecodeResult r{boundary_strength(stats), coherence_map(stats, cfg), std::nullopt};
  try {
    r.estimate = estimate_mask(r.boundary, r.coherence, opts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoRegionFound) throw;
  }
  return r;
}

DecodeResult decode_video(const FrameSequence& seq, const FlowOptions& flow,
                          const MetricConfig& cfg, const MaskEstimateOptions& opts) {
  validate(cfg);
  validate(flow);
  if (seq.size() < 3) throw Error(ErrorCode::TooFewFrames, "decoding needs at least 3 frames");
  FlowStats stats(seq.width(), seq.height(), effective_border(cfg, flow));
  for_each_flow(seq, flow, [&](std::size_t, const FlowField& f) { stats.add(f); });
  return decode_from_stats(stats, cfg, opts);
}

}  // namespace spooky
