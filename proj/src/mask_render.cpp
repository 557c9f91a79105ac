#include "spooky/mask_render.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>

#include "font8x8.hpp"
#include "spooky/image_io.hpp"

namespace spooky {

namespace {

constexpr double kEps = 1e-9;

void require_canvas(int w, int h) {
  if (w <= 0 || h <= 0) {
    throw Error(ErrorCode::ZeroDimension, "canvas dimensions must be positive", "canvas");
  }
}

bool inside_canvas(Point p, int w, int h) {
  return p.x >= -kEps && p.y >= -kEps && p.x <= w - 1 + kEps && p.y <= h - 1 + kEps;
}

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(Point p, Point a, Point b) {
  if (std::abs(cross(a, b, p)) > kEps) return false;
  return p.x >= std::min(a.x, b.x) - kEps && p.x <= std::max(a.x, b.x) + kEps &&
         p.y >= std::min(a.y, b.y) - kEps && p.y <= std::max(a.y, b.y) + kEps;
}

int orientation(Point a, Point b, Point c) {
  const double v = cross(a, b, c);
  if (std::abs(v) <= kEps) return 0;
  return v > 0 ? 1 : -1;
}

bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  return (o1 == 0 && on_segment(q1, p1, p2)) || (o2 == 0 && on_segment(q2, p1, p2)) ||
         (o3 == 0 && on_segment(p1, q1, q2)) || (o4 == 0 && on_segment(p2, q1, q2));
}

bool polygon_is_simple(const std::vector<Point>& v) {
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
    }
  }
  return true;
}

double polygon_area(const std::vector<Point>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % v.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2.0;
}

bool polygon_contains(const std::vector<Point>& v, Point p) {
  bool in = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if (on_segment(p, v[j], v[i])) return true;
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double x = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (p.x < x) in = !in;
    }
  }
  return in;
}

template <typename Pred>
ContentMask rasterize(int w, int h, Pred inside) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bits[static_cast<std::size_t>(y) * w + x] = inside(Point{double(x), double(y)}) ? 1 : 0;
    }
  }
  return ContentMask(w, h, std::move(bits));
}

const detail::Glyph& glyph_for(char c) {
  if (c < detail::kFirstGlyph || c > detail::kLastGlyph) {
    throw Error(ErrorCode::UnsupportedGlyph,
                "character code " + std::to_string(static_cast<unsigned char>(c)) +
                    " is not in the printable ASCII repertoire",
                "text");
  }
  return detail::kFont8x8[static_cast<std::size_t>(c - detail::kFirstGlyph)];
}

}  // namespace

ContentMask render_shape_mask(const ShapeSpec& s) {
  const int w = s.canvas_width;
  const int h = s.canvas_height;
  require_canvas(w, h);

  if (const auto* r = std::get_if<RectangleShape>(&s.geometry)) {
    if (r->w <= 0.0 || r->h <= 0.0) {
      throw Error(ErrorCode::DegenerateShape, "rectangle has zero area", "geometry");
    }
    const Point far{r->corner.x + r->w, r->corner.y + r->h};
    if (!inside_canvas(r->corner, w, h) || !inside_canvas(far, w, h)) {
      throw Error(ErrorCode::OutOfCanvas, "rectangle exceeds the canvas", "geometry");
    }
    return rasterize(w, h, [&](Point p) {
      return p.x >= r->corner.x - kEps && p.x <= far.x + kEps && p.y >= r->corner.y - kEps &&
             p.y <= far.y + kEps;
    });
  }

  if (const auto* c = std::get_if<CircleShape>(&s.geometry)) {
    if (c->radius <= 0.0) {
      throw Error(ErrorCode::DegenerateShape, "circle radius must be positive", "geometry");
    }
    const Point lo{c->center.x - c->radius, c->center.y - c->radius};
    const Point hi{c->center.x + c->radius, c->center.y + c->radius};
    if (!inside_canvas(lo, w, h) || !inside_canvas(hi, w, h)) {
      throw Error(ErrorCode::OutOfCanvas, "circle exceeds the canvas", "geometry");
    }
    const double r2 = c->radius * c->radius;
    return rasterize(w, h, [&](Point p) {
      const double dx = p.x - c->center.x;
      const double dy = p.y - c->center.y;
      return dx * dx + dy * dy <= r2 + kEps;
    });
  }

  const auto& poly = std::get<PolygonShape>(s.geometry);
  if (poly.vertices.size() < 3) {
    throw Error(ErrorCode::DegenerateShape, "polygon needs at least 3 vertices", "geometry");
  }
  for (const auto& v : poly.vertices) {
    if (!inside_canvas(v, w, h)) {
      throw Error(ErrorCode::OutOfCanvas, "polygon vertex outside the canvas", "geometry");
    }
  }
  if (polygon_area(poly.vertices) <= kEps) {
    throw Error(ErrorCode::DegenerateShape, "polygon has zero area", "geometry");
  }
  if (!polygon_is_simple(poly.vertices)) {
    throw Error(ErrorCode::DegenerateShape, "polygon is self-intersecting", "geometry");
  }
  return rasterize(w, h, [&](Point p) { return polygon_contains(poly.vertices, p); });
}

std::array<std::uint8_t, 8> glyph_rows(char c) { return glyph_for(c); }

int glyph_bit_count(char c) {
  int n = 0;
  for (auto row : glyph_for(c)) n += std::popcount(static_cast<unsigned>(row));
  return n;
}

namespace {

std::pair<long long, long long> text_extent(const std::string& text, long long scale) {
  const long long n = static_cast<long long>(text.size());
  const long long units_w = n * kGlyphCells + (n - 1) * kGlyphSpacing;
  return {units_w * scale, static_cast<long long>(kGlyphCells) * scale};
}

}  // namespace

ContentMask render_text_mask(const TextSpec& t) {
  require_canvas(t.canvas_width, t.canvas_height);
  if (t.text.empty()) throw Error(ErrorCode::EmptyText, "text must not be empty", "text");
  if (t.scale < 1) throw Error(ErrorCode::InvalidArgument, "scale must be >= 1", "scale");
  for (char c : t.text) glyph_for(c);

  const auto [tw, th] = text_extent(t.text, t.scale);
  if (tw > t.canvas_width || th > t.canvas_height) {
    throw Error(ErrorCode::TextTooLarge,
                "rendered text " + std::to_string(tw) + "x" + std::to_string(th) +
                    " does not fit the canvas",
                "scale");
  }
  const int x0 = static_cast<int>((t.canvas_width - tw) / 2);
  const int y0 = static_cast<int>((t.canvas_height - th) / 2);

  std::vector<std::uint8_t> bits(static_cast<std::size_t>(t.canvas_width) * t.canvas_height, 0);
  for (std::size_t i = 0; i < t.text.size(); ++i) {
    const auto& g = glyph_for(t.text[i]);
    const int gx = x0 + static_cast<int>(i) * (kGlyphCells + kGlyphSpacing) * t.scale;
    for (int row = 0; row < kGlyphCells; ++row) {
      for (int col = 0; col < kGlyphCells; ++col) {
        if (!((g[static_cast<std::size_t>(row)] >> col) & 1U)) continue;
        for (int sy = 0; sy < t.scale; ++sy) {
          const int y = y0 + row * t.scale + sy;
          auto* dst = bits.data() + static_cast<std::size_t>(y) * t.canvas_width;
          std::fill_n(dst + gx + col * t.scale, t.scale, std::uint8_t{1});
        }
      }
    }
  }
  return ContentMask(t.canvas_width, t.canvas_height, std::move(bits));
}

int fit_text_scale(const std::string& text, int canvas_width, int canvas_height, double fill) {
  if (text.empty()) throw Error(ErrorCode::EmptyText, "text must not be empty", "text");
  const auto [uw, uh] = text_extent(text, 1);
  const double by_w = fill * canvas_width / static_cast<double>(uw);
  const double by_h = fill * canvas_height / static_cast<double>(uh);
  const int scale = static_cast<int>(std::floor(std::min(by_w, by_h)));
  if (scale < 1) {
    throw Error(ErrorCode::TextTooLarge, "text does not fit the canvas at scale 1", "text");
  }
  return scale;
}

ContentMask mask_from_frame(const FrameBuffer& image, int target_width, int target_height) {
  int w = image.width();
  int h = image.height();
  if (target_width > 0 && target_height > 0) {
    w = target_width;
    h = target_height;
  }
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * image.height() / h);
    for (int x = 0; x < w; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * image.width() / w);
      bits[static_cast<std::size_t>(y) * w + x] = image.at(sx, sy) >= 128 ? 1 : 0;
    }
  }
  ContentMask mask(w, h, std::move(bits));
  if (mask.count() == 0) {
    throw Error(ErrorCode::EmptyMask, "mask image has no foreground after thresholding");
  }
  return mask;
}

ContentMask load_mask_image(std::span<const std::uint8_t> png_bytes, int target_width,
                            int target_height) {
  return mask_from_frame(decode_png(png_bytes), target_width, target_height);
}

ContentMask load_mask_file(const std::filesystem::path& path, int target_width,
                           int target_height) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::UnreadableImage, e.what());
  }
  return load_mask_image(bytes, target_width, target_height);
}

DepthSequence load_depth_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::IoFailure, "not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    if (ext == ".png") files.push_back(entry.path());
  }
  if (files.empty()) {
    throw Error(ErrorCode::EmptyDirectory, "no PNG depth frames in " + dir.string());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<FrameBuffer> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(read_png(f));
  return DepthSequence(std::move(frames));
}

}  // namespace spooky
