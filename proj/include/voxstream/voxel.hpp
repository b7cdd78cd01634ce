#pragma once

#include "voxstream/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace voxstream {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr int kTsdfScale = 32767;
inline constexpr int kMaxWeight = 255;

/// Linear 16-bit encoding of a truncated distance in [-1, 1]. Out-of-range
/// values are clamped.
inline std::int16_t encode_tsdf(double d) {
  const double clamped = std::clamp(d, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(clamped * kTsdfScale));
}

inline double decode_tsdf(std::int16_t e) { return static_cast<double>(e) / kTsdfScale; }

struct TsdfVoxel {
  std::int16_t d = kTsdfScale;  // free space until observed
  std::uint16_t w = 0;
  Rgb c{0, 0, 0};

  double distance() const { return decode_tsdf(d); }

  friend bool operator==(const TsdfVoxel&, const TsdfVoxel&) = default;
};

struct McVoxel {
  std::uint8_t index = 0;
  Rgb c{0, 0, 0};

  bool has_surface() const { return index != 0 && index != 255; }

  friend bool operator==(const McVoxel&, const McVoxel&) = default;
};

/// 8x8x8 voxels in x-fastest order.
template <class V>
struct VoxelBlock {
  std::array<V, kBlockVoxels> voxels{};

  V& operator[](int i) { return voxels[static_cast<std::size_t>(i)]; }
  const V& operator[](int i) const { return voxels[static_cast<std::size_t>(i)]; }
  V& at(int x, int y, int z) { return voxels[static_cast<std::size_t>(linear_index(x, y, z))]; }
  const V& at(int x, int y, int z) const { return voxels[static_cast<std::size_t>(linear_index(x, y, z))]; }

  friend bool operator==(const VoxelBlock&, const VoxelBlock&) = default;
};

using TsdfBlock = VoxelBlock<TsdfVoxel>;
using McBlock = VoxelBlock<McVoxel>;

}  // namespace voxstream
