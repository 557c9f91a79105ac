#pragma once

#include <array>
#include <cstdint>

namespace spooky::detail {

using Glyph = std::array<std::uint8_t, 8>;

inline constexpr char kFirstGlyph = 0x20;
inline constexpr char kLastGlyph = 0x7E;
inline constexpr int kGlyphCount = kLastGlyph - kFirstGlyph + 1;

extern const std::array<Glyph, kGlyphCount> kFont8x8;

}  // namespace spooky::detail
