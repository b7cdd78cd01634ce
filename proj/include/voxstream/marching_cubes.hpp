#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace voxstream::mc {

/// Corner k of a cell sits at offset (k & 1, (k >> 1) & 1, (k >> 2) & 1).
constexpr std::array<int, 3> corner_offset(int k) { return {k & 1, (k >> 1) & 1, (k >> 2) & 1}; }

/// Cell edges as corner pairs: 0-3 run along x, 4-7 along y, 8-11 along z.
inline constexpr std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},
    {0, 2}, {1, 3}, {4, 6}, {5, 7},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

/// Triangle table indexed by case index (bit k set = corner k inside),
/// listing edge triples terminated by -1.
extern const std::array<std::array<std::int8_t, 16>, 256> kTriangleTable;

int triangle_count(int index);

/// Doubled edge midpoint offset relative to corner 0, each component in {0, 1, 2}.
constexpr std::array<int, 3> edge_midpoint2(int edge) {
  const auto a = corner_offset(kEdgeCorners[static_cast<std::size_t>(edge)][0]);
  const auto b = corner_offset(kEdgeCorners[static_cast<std::size_t>(edge)][1]);
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

}  // namespace voxstream::mc
