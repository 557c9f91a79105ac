#pragma once

#include <functional>
#include <vector>

#include "spooky/core_types.hpp"
#include "spooky/encoder.hpp"

namespace spooky {

struct FlowOptions {
  int window = 4;     ///< SAD block radius in pixels
  int max_disp = 8;   ///< search range in pixels per frame
  int levels = 2;     ///< pyramid levels, 1 = single scale
  int smoothing = 1;  ///< box radius applied to the final field, 0 disables
};

void validate(const FlowOptions& o);

/// Width of the frame border where block matching runs on clamped windows.
/// Metric aggregations skip this band.
inline int border_band(const FlowOptions& o) noexcept { return o.window + o.max_disp; }

/// Dense block-matching flow with a(x, y) ~ b(x + u, y + v).
///
/// At the coarsest pyramid level every integer displacement within the
/// scaled search range is tried. Finer levels work on 64x32 pixel tiles: a
/// tile tries the 3x3 neighbourhood of twice each coarse estimate found over
/// the tile (grown by one coarse pixel) at least 8 times, always including the
/// most frequent one. Cost is the sum of absolute differences over a
/// (2 * window + 1)^2 block, truncated at the frame edge, with the displaced
/// frame sampled at clamped coordinates. Ties resolve to the smaller squared
/// length, then smaller v, then smaller u. The integer field is finally
/// box-averaged with radius `smoothing`.
FlowField estimate_flow(const FrameBuffer& a, const FrameBuffer& b, const FlowOptions& o = {});

/// Integer field before smoothing; exposed for tests.
struct IntegerFlow {
  int width = 0;
  int height = 0;
  std::vector<int> u;
  std::vector<int> v;
};
IntegerFlow match_blocks(const FrameBuffer& a, const FrameBuffer& b, const FlowOptions& o = {});

/// flows[i] = estimate_flow(seq[i], seq[i + 1]).
std::vector<FlowField> flow_sequence(const FrameSequence& seq, const FlowOptions& o = {});

/// Streams the same flows in frame order without keeping them all in memory.
void for_each_flow(const FrameSequence& seq, const FlowOptions& o,
                   const std::function<void(std::size_t, const FlowField&)>& sink);

}  // namespace spooky
