#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spooky/core_types.hpp"

namespace spooky {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Closed axis-aligned box [x, x + w] x [y, y + h].
struct RectangleShape {
  Point corner;
  double w = 0.0;
  double h = 0.0;
};

struct CircleShape {
  Point center;
  double radius = 0.0;
};

/// Simple polygon, at least three vertices, either winding.
struct PolygonShape {
  std::vector<Point> vertices;
};

struct ShapeSpec {
  std::variant<RectangleShape, CircleShape, PolygonShape> geometry;
  int canvas_width = 0;
  int canvas_height = 0;
};

/// A pixel is foreground when its integer coordinate lies inside the closed
/// shape (boundary inclusive).
ContentMask render_shape_mask(const ShapeSpec& s);

struct TextSpec {
  std::string text;
  int scale = 1;
  int canvas_width = 0;
  int canvas_height = 0;
};

/// Glyph cell edge in font units, and the gap between consecutive glyphs.
inline constexpr int kGlyphCells = 8;
inline constexpr int kGlyphSpacing = 1;

/// Set-bit count of the embedded glyph for `c`. Throws UnsupportedGlyph.
int glyph_bit_count(char c);
/// Row bitmap of the embedded glyph; bit 0 of each byte is the leftmost pixel.
std::array<std::uint8_t, 8> glyph_rows(char c);

/// Renders centered, left-to-right, glyphs scaled by pixel replication.
ContentMask render_text_mask(const TextSpec& t);

/// Largest integer scale at which `text` spans at most `fill` of the canvas.
int fit_text_scale(const std::string& text, int canvas_width, int canvas_height,
                   double fill = 0.8);

/// Thresholds intensities at 128. When target dimensions are given (> 0) the
/// image is resampled nearest-neighbor first.
ContentMask mask_from_frame(const FrameBuffer& image, int target_width = 0,
                            int target_height = 0);
ContentMask load_mask_image(std::span<const std::uint8_t> png_bytes, int target_width = 0,
                            int target_height = 0);
ContentMask load_mask_file(const std::filesystem::path& path, int target_width = 0,
                           int target_height = 0);

/// Grayscale PNG frames of a directory, in lexicographic file-name order.
DepthSequence load_depth_sequence(const std::filesystem::path& dir);

}  // namespace spooky
