#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace voxstream {

inline constexpr int kBlockDim = 8;
inline constexpr int kBlockVoxels = kBlockDim * kBlockDim * kBlockDim;

struct GridConfig {
  double voxel_size = 0.005;
  double truncation = 0.060;
  int block_dim = kBlockDim;
  std::size_t tsdf_bucket_count = std::size_t{1} << 20;
  std::size_t mc_bucket_count = std::size_t{1} << 22;
  std::size_t tsdf_pool_blocks = std::size_t{1} << 19;
  std::size_t mc_pool_blocks = std::size_t{1} << 20;

  /// Throws ArgumentError when an invariant is violated.
  void validate() const;

  double block_size() const { return voxel_size * kBlockDim; }
};

struct BlockPosition {
  std::int16_t x = 0;
  std::int16_t y = 0;
  std::int16_t z = 0;

  friend auto operator<=>(const BlockPosition&, const BlockPosition&) = default;
};

/// Integer voxel coordinates inside a block, each in [0, 8).
struct LocalVoxel {
  int x = 0;
  int y = 0;
  int z = 0;

  friend bool operator==(const LocalVoxel&, const LocalVoxel&) = default;
};

struct VoxelAddress {
  BlockPosition block;
  LocalVoxel local;
};

constexpr int linear_index(int x, int y, int z) { return x + kBlockDim * y + kBlockDim * kBlockDim * z; }

constexpr LocalVoxel local_from_linear(int index) {
  return {index % kBlockDim, (index / kBlockDim) % kBlockDim, index / (kBlockDim * kBlockDim)};
}

/// h = (x*73856093 ^ y*19349669 ^ z*83492791) mod bucket_count, computed on
/// the two's-complement 32-bit representation. bucket_count must be a power of two.
std::size_t block_hash(BlockPosition p, std::size_t bucket_count);

/// Global integer voxel index (block * 8 + local) per axis.
using VoxelIndex = Eigen::Vector3i;

inline VoxelIndex global_index(BlockPosition b, LocalVoxel l) {
  return {b.x * kBlockDim + l.x, b.y * kBlockDim + l.y, b.z * kBlockDim + l.z};
}

/// Splits a global voxel index into its block and local part. Throws
/// AddressingError if the block coordinate does not fit in 16 bits.
VoxelAddress split_index(const VoxelIndex& g);

/// Floor-based partition of world space. Throws AddressingError outside the
/// addressable extent.
VoxelAddress world_to_voxel(const Eigen::Vector3d& point, const GridConfig& grid);

/// Minimum corner of the voxel in world space.
Eigen::Vector3d voxel_min_corner(BlockPosition b, LocalVoxel l, const GridConfig& grid);

/// Voxel sample location (center of the voxel cell) in world space.
Eigen::Vector3d voxel_center(const VoxelIndex& g, const GridConfig& grid);

/// Block containing the given world point, or AddressingError.
BlockPosition world_to_block(const Eigen::Vector3d& point, const GridConfig& grid);

bool block_in_range(long x, long y, long z);

}  // namespace voxstream

template <>
struct std::hash<voxstream::BlockPosition> {
  std::size_t operator()(const voxstream::BlockPosition& p) const noexcept {
    const auto ux = static_cast<std::uint32_t>(static_cast<std::uint16_t>(p.x));
    const auto uy = static_cast<std::uint32_t>(static_cast<std::uint16_t>(p.y));
    const auto uz = static_cast<std::uint32_t>(static_cast<std::uint16_t>(p.z));
    const std::uint64_t key = (std::uint64_t{ux} << 32) | (std::uint64_t{uy} << 16) | uz;
    return std::hash<std::uint64_t>{}(key * 0x9E3779B97F4A7C15ull);
  }
};
