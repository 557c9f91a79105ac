#include "spooky/snr_metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>

#include "spooky/decoder.hpp"

namespace spooky {

void validate(const MetricConfig& c) {
  if (!(c.f0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "f0 must be positive", "f0");
  if (!(c.tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0", "tau");
  if (c.local_window < 3 || c.local_window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "local_window must be odd and >= 3", "local_window");
  }
  if (c.border_exclude && *c.border_exclude < 0) {
    throw Error(ErrorCode::InvalidArgument, "border_exclude must be >= 0", "border_exclude");
  }
}

int effective_border(const MetricConfig& c, const FlowOptions& flow) {
  return std::max(1, c.border_exclude.value_or(border_band(flow)));
}

FlowStats::FlowStats(int width, int height, int border)
    : width_(width), height_(height), border_(std::max(1, border)) {
  if (width_ <= 2 * border_ || height_ <= 2 * border_) {
    throw Error(ErrorCode::FrameTooSmall, "frame has no interior after border exclusion");
  }
  const auto n = static_cast<std::size_t>(width) * height;
  for (auto* v : {&sum_u_, &sum_v_, &sum_sq_, &sum_dir_x_, &sum_dir_y_, &sum_mag_, &sum_jac_}) {
    v->assign(n, 0.0);
  }
}

std::size_t FlowStats::interior_pixels() const noexcept {
  return static_cast<std::size_t>(width_ - 2 * border_) * (height_ - 2 * border_);
}

void FlowStats::add(const FlowField& f) {
  if (f.width() != width_ || f.height() != height_) {
    throw Error(ErrorCode::DimensionMismatch, "flow field size differs from the statistics");
  }
  const auto u = f.u();
  const auto v = f.v();
  const std::size_t w = static_cast<std::size_t>(width_);
  for (int y = border_; y < height_ - border_; ++y) {
    for (int x = border_; x < width_ - border_; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double fu = u[i];
      const double fv = v[i];
      const double dux = (u[i + 1] - u[i - 1]) * 0.5;
      const double duy = (u[i + w] - u[i - w]) * 0.5;
      const double dvx = (v[i + 1] - v[i - 1]) * 0.5;
      const double dvy = (v[i + w] - v[i - w]) * 0.5;
      const double jac2 = dux * dux + duy * duy + dvx * dvx + dvy * dvy;
      const double mag2 = fu * fu + fv * fv;
      const double mag = std::sqrt(mag2);
      jacobian_energy_ += jac2;
      sum_jac_[i] += std::sqrt(jac2);
      sum_u_[i] += fu;
      sum_v_[i] += fv;
      sum_sq_[i] += mag2;
      sum_mag_[i] += mag;
      if (mag > 0.0) {
        sum_dir_x_[i] += fu / mag;
        sum_dir_y_[i] += fv / mag;
      }
    }
  }
  ++count_;
}

FlowStats accumulate(std::span<const FlowField> flows, int border) {
  if (flows.empty()) throw Error(ErrorCode::TooFewFrames, "need at least one flow field");
  FlowStats s(flows.front().width(), flows.front().height(), border);
  for (const auto& f : flows) s.add(f);
  return s;
}

namespace {

void require_flows(const FlowStats& s, std::size_t minimum) {
  if (s.flow_count() < minimum) {
    throw Error(ErrorCode::TooFewFrames,
                "need at least " + std::to_string(minimum) + " flow field(s)");
  }
}

double to_db(double ratio) { return 10.0 * std::log10(ratio); }

}  // namespace

ScalarMap boundary_strength(const FlowStats& s) {
  require_flows(s, 1);
  ScalarMap m{s.width(), s.height(), std::vector<double>(s.sum_jacobian_norm().size(), 0.0),
              MapKind::BoundaryStrength, s.border()};
  const double t = static_cast<double>(s.flow_count());
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      if (!s.interior(x, y)) continue;
      const auto i = static_cast<std::size_t>(y) * s.width() + x;
      m.values[i] = s.sum_jacobian_norm()[i] / t;
    }
  }
  return m;
}

ScalarMap coherence_map(const FlowStats& s, const MetricConfig& cfg) {
  require_flows(s, 1);
  ScalarMap m{s.width(), s.height(), std::vector<double>(s.sum_mag().size(), 0.0),
              MapKind::Coherence, s.border()};
  const double t = static_cast<double>(s.flow_count());
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      if (!s.interior(x, y)) continue;
      const auto i = static_cast<std::size_t>(y) * s.width() + x;
      if (!(s.sum_mag()[i] / t > cfg.tau)) continue;
      const double rx = s.sum_dir_x()[i] / t;
      const double ry = s.sum_dir_y()[i] / t;
      const double resultant = std::min(1.0, std::hypot(rx, ry));
      m.values[i] = std::exp(-(1.0 - resultant));
    }
  }
  return m;
}

namespace {

double population_variance(std::span<const std::uint8_t> px) {
  const double n = static_cast<double>(px.size());
  double mean = 0.0;
  for (auto p : px) mean += p;
  mean /= n;
  double var = 0.0;
  for (auto p : px) var += (p - mean) * (p - mean);
  return var / n;
}

}  // namespace

double basic_snr(const FlowStats& s, const FrameBuffer& first_frame) {
  require_flows(s, 1);
  const double pn = population_variance(first_frame.pixels());
  if (pn == 0.0) {
    throw Error(ErrorCode::ZeroNoiseVariance, "first frame is constant; noise power is zero");
  }
  const double ps =
      s.jacobian_energy() / (static_cast<double>(s.interior_pixels()) * s.flow_count());
  if (ps == 0.0) return -std::numeric_limits<double>::infinity();
  return to_db(ps / pn);
}

double basic_snr(std::span<const FlowField> flows, const FrameBuffer& first_frame,
                 const MetricConfig& cfg) {
  validate(cfg);
  return basic_snr(accumulate(flows, effective_border(cfg)), first_frame);
}

double csf_weight(double f, double f0) noexcept { return f * std::exp(-f / f0); }

namespace {

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// FFTW planning is not thread safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

// Sum over the padded spectrum of |H(x)|^2 * W(f)^2.
double weighted_spectral_energy(int w, int h, const std::function<double(int, int)>& value,
                                double f0) {
  const int pw = next_pow2(w);
  const int ph = next_pow2(h);
  const std::size_t n = static_cast<std::size_t>(pw) * ph;
  std::unique_ptr<fftw_complex, FftwDeleter> buf(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(ph, pw, buf.get(), buf.get(), FFTW_FORWARD, FFTW_ESTIMATE);
  }
  auto* data = buf.get();
  for (std::size_t i = 0; i < n; ++i) data[i][0] = data[i][1] = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) data[static_cast<std::size_t>(y) * pw + x][0] = value(x, y);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }

  double energy = 0.0;
  for (int ky = 0; ky < ph; ++ky) {
    const double fy = static_cast<double>(std::min(ky, ph - ky)) / ph;
    for (int kx = 0; kx < pw; ++kx) {
      const double fx = static_cast<double>(std::min(kx, pw - kx)) / pw;
      const double wgt = csf_weight(std::hypot(fx, fy), f0);
      const auto& c = data[static_cast<std::size_t>(ky) * pw + kx];
      energy += (c[0] * c[0] + c[1] * c[1]) * wgt * wgt;
    }
  }
  return energy;
}

}  // namespace

double perceptual_snr(const ScalarMap& boundary, const FrameBuffer& noise_frame,
                      const MetricConfig& cfg) {
  validate(cfg);
  if (boundary.width != noise_frame.width() || boundary.height != noise_frame.height()) {
    throw Error(ErrorCode::DimensionMismatch, "boundary map and noise frame differ in size");
  }
  const int w = boundary.width;
  const int h = boundary.height;
  const double noise = weighted_spectral_energy(
      w, h, [&](int x, int y) { return static_cast<double>(noise_frame.at(x, y)); }, cfg.f0);
  if (noise == 0.0) {
    throw Error(ErrorCode::ZeroWeightedNoise, "noise frame has no weighted spectral energy");
  }
  const double signal =
      weighted_spectral_energy(w, h, [&](int x, int y) { return boundary.at(x, y); }, cfg.f0);
  if (signal == 0.0) return -std::numeric_limits<double>::infinity();
  return to_db(signal / noise);
}

double perceptual_snr(std::span<const FlowField> flows, const FrameBuffer& noise_frame,
                      const MetricConfig& cfg) {
  validate(cfg);
  return perceptual_snr(boundary_strength(accumulate(flows, effective_border(cfg))), noise_frame,
                        cfg);
}

double temporal_coherence_snr(const FlowStats& s, const MetricConfig& cfg) {
  validate(cfg);
  require_flows(s, 2);
  const auto c = coherence_map(s, cfg);
  const int b = s.border();
  const int iw = s.width() - 2 * b;
  const int ih = s.height() - 2 * b;

  // Integral images of C and C^2 over the interior.
  const std::size_t stride = static_cast<std::size_t>(iw) + 1;
  std::vector<double> s1(stride * (ih + 1), 0.0);
  std::vector<double> s2(s1.size(), 0.0);
  for (int y = 0; y < ih; ++y) {
    double r1 = 0.0;
    double r2 = 0.0;
    for (int x = 0; x < iw; ++x) {
      const double v = c.at(x + b, y + b);
      r1 += v;
      r2 += v * v;
      s1[(y + 1) * stride + x + 1] = s1[y * stride + x + 1] + r1;
      s2[(y + 1) * stride + x + 1] = s2[y * stride + x + 1] + r2;
    }
  }
  const double n = static_cast<double>(iw) * ih;
  const double mean = s1.back() / n;
  double var = 0.0;
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      const double d = c.at(x + b, y + b) - mean;
      var += d * d;
    }
  }
  var /= n;

  const int r = cfg.local_window / 2;
  double local_sum = 0.0;
  for (int y = 0; y < ih; ++y) {
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(ih - 1, y + r) + 1;
    for (int x = 0; x < iw; ++x) {
      const int x0 = std::max(0, x - r);
      const int x1 = std::min(iw - 1, x + r) + 1;
      auto box = [&](const std::vector<double>& t) {
        return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] +
               t[y0 * stride + x0];
      };
      const double k = static_cast<double>(x1 - x0) * (y1 - y0);
      const double m = box(s1) / k;
      // Integral-image rounding leaves residue of order 1e-16 on flat windows.
      const double lv = box(s2) / k - m * m;
      if (lv > 1e-12) local_sum += lv;
    }
  }
  const double local = local_sum / n;
  if (var <= 0.0 || local <= 0.0) {
    throw Error(ErrorCode::DegenerateCoherence,
                "coherence map is constant; temporal coherence SNR is undefined");
  }
  return to_db(var / local);
}

double temporal_coherence_snr(std::span<const FlowField> flows, const MetricConfig& cfg) {
  validate(cfg);
  return temporal_coherence_snr(accumulate(flows, effective_border(cfg)), cfg);
}

double motion_contrast_snr(const FlowStats& s, const ContentMask& mask) {
  require_flows(s, 1);
  if (mask.width() != s.width() || mask.height() != s.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask size differs from the flow size", "mask");
  }
  struct Region {
    double su = 0, sv = 0, sq = 0;
    std::size_t n = 0;
  } fg, bg;
  for (int y = 0; y < s.height(); ++y) {
    for (int x = 0; x < s.width(); ++x) {
      if (!s.interior(x, y)) continue;
      const auto i = static_cast<std::size_t>(y) * s.width() + x;
      Region& r = mask.at(x, y) ? fg : bg;
      r.su += s.sum_u()[i];
      r.sv += s.sum_v()[i];
      r.sq += s.sum_sq()[i];
      ++r.n;
    }
  }
  if (fg.n == 0 || bg.n == 0) {
    throw Error(ErrorCode::EmptyRegion, "mask or its complement is empty inside the border",
                "mask");
  }
  const double t = static_cast<double>(s.flow_count());
  auto stats = [t](const Region& r) {
    const double n = static_cast<double>(r.n) * t;
    const double mu = r.su / n;
    const double mv = r.sv / n;
    const double var = std::max(0.0, r.sq / n - (mu * mu + mv * mv));
    return std::array<double, 3>{mu, mv, var};
  };
  const auto m = stats(fg);
  const auto b = stats(bg);
  const double du = m[0] - b[0];
  const double dv = m[1] - b[1];
  const double num = du * du + dv * dv;
  if (num == 0.0) return -std::numeric_limits<double>::infinity();
  const double den = 0.5 * (m[2] + b[2]);
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return to_db(num / den);
}

double motion_contrast_snr(std::span<const FlowField> flows, const ContentMask& mask,
                           const MetricConfig& cfg) {
  validate(cfg);
  return motion_contrast_snr(accumulate(flows, effective_border(cfg)), mask);
}

MetricValue MetricValue::from_db(double v) {
  MetricValue m;
  m.db = v;
  if (std::isnan(v)) {
    m.status = MetricStatus::NotApplicable;
  } else if (std::isinf(v)) {
    m.status = v < 0 ? MetricStatus::NegativeInfinity : MetricStatus::PositiveInfinity;
  } else {
    m.status = MetricStatus::Finite;
  }
  return m;
}

MetricValue MetricValue::not_applicable(std::string why) {
  MetricValue m;
  m.status = MetricStatus::NotApplicable;
  m.db = std::numeric_limits<double>::quiet_NaN();
  m.note = std::move(why);
  return m;
}

MetricValue combine(const std::vector<MetricValue>& parts) {
  double sum = 0.0;
  int n = 0;
  for (const auto& p : parts) {
    if (!p.finite()) continue;
    sum += p.db;
    ++n;
  }
  if (n == 0) return MetricValue::not_applicable("no finite component");
  auto m = MetricValue::from_db(sum / n);
  m.note = "unweighted mean of " + std::to_string(n) + " finite component(s)";
  return m;
}

namespace {

template <typename Fn>
MetricValue guarded(Fn&& fn) {
  try {
    return MetricValue::from_db(fn());
  } catch (const Error& e) {
    return MetricValue::not_applicable(std::string(to_string(e.code())) + ": " + e.what());
  }
}

}  // namespace

SnrReport analyze_video(const FrameSequence& seq, const std::optional<ContentMask>& mask,
                        const MetricConfig& cfg, const FlowOptions& flow) {
  validate(cfg);
  validate(flow);
  if (seq.size() < 3) throw Error(ErrorCode::TooFewFrames, "analysis needs at least 3 frames");
  if (mask && (mask->width() != seq.width() || mask->height() != seq.height())) {
    throw Error(ErrorCode::DimensionMismatch, "mask size differs from the video size", "mask");
  }

  SnrReport r;
  r.frame_count = seq.size();
  r.width = seq.width();
  r.height = seq.height();
  r.fps = seq.fps();
  r.params = seq.params();
  r.config = cfg;
  r.flow = flow;

  FlowStats stats(seq.width(), seq.height(), effective_border(cfg, flow));
  for_each_flow(seq, flow, [&](std::size_t, const FlowField& f) { stats.add(f); });

  const FrameBuffer& first = seq[0];
  r.basic = guarded([&] { return basic_snr(stats, first); });
  r.perceptual = guarded([&] { return perceptual_snr(boundary_strength(stats), first, cfg); });
  r.temporal_coherence = guarded([&] { return temporal_coherence_snr(stats, cfg); });

  std::optional<ContentMask> contrast_mask;
  if (cfg.mask_source == MaskSource::GroundTruth && mask) {
    contrast_mask = mask;
    r.mask_source_used = MaskSource::GroundTruth;
  } else {
    r.mask_source_used = MaskSource::Estimated;
    if (cfg.mask_source == MaskSource::GroundTruth) {
      r.notes.push_back("no ground-truth mask supplied; motion contrast uses the estimated mask");
    }
    try {
      contrast_mask = decode_from_stats(stats, cfg).estimate.value().mask;
    } catch (const std::bad_optional_access&) {
    } catch (const Error&) {
    }
  }
  if (contrast_mask) {
    r.motion_contrast = guarded([&] { return motion_contrast_snr(stats, *contrast_mask); });
  } else {
    r.motion_contrast = MetricValue::not_applicable("NoRegionFound: no mask could be estimated");
  }

  r.combined = combine({r.basic, r.perceptual, r.temporal_coherence, r.motion_contrast});
  r.contentless = r.basic.status == MetricStatus::NegativeInfinity;
  r.notes.push_back(
      "circular variance averages unit directions over all frames (zero vectors count as "
      "zero); the magnitude gate uses the time-mean magnitude");
  r.notes.push_back("combined_db is the unweighted mean of the finite components");
  return r;
}

}  // namespace spooky
