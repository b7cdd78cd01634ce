#include "voxstream/grid.hpp"

#include "voxstream/errors.hpp"

#include <cmath>
#include <limits>

namespace voxstream {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

void GridConfig::validate() const {
  if (!(voxel_size > 0.0)) throw ArgumentError("voxel_size must be positive");
  if (truncation < 2.0 * voxel_size) throw ArgumentError("truncation must be at least two voxels");
  if (block_dim != kBlockDim) throw ArgumentError("block_dim must be 8");
  if (!is_power_of_two(tsdf_bucket_count) || !is_power_of_two(mc_bucket_count))
    throw ArgumentError("bucket counts must be powers of two");
  if (tsdf_pool_blocks == 0 || mc_pool_blocks == 0) throw ArgumentError("pool sizes must be positive");
}

std::size_t block_hash(BlockPosition p, std::size_t bucket_count) {
  const auto x = static_cast<std::uint32_t>(static_cast<std::int32_t>(p.x));
  const auto y = static_cast<std::uint32_t>(static_cast<std::int32_t>(p.y));
  const auto z = static_cast<std::uint32_t>(static_cast<std::int32_t>(p.z));
  const std::uint32_t h = (x * 73856093u) ^ (y * 19349669u) ^ (z * 83492791u);
  return static_cast<std::size_t>(h) & (bucket_count - 1);
}

bool block_in_range(long x, long y, long z) {
  constexpr long lo = std::numeric_limits<std::int16_t>::min();
  constexpr long hi = std::numeric_limits<std::int16_t>::max();
  return x >= lo && x <= hi && y >= lo && y <= hi && z >= lo && z <= hi;
}

VoxelAddress split_index(const VoxelIndex& g) {
  const long bx = floor_div(g.x(), kBlockDim);
  const long by = floor_div(g.y(), kBlockDim);
  const long bz = floor_div(g.z(), kBlockDim);
  if (!block_in_range(bx, by, bz)) throw AddressingError("voxel index outside addressable block range");
  VoxelAddress a;
  a.block = {static_cast<std::int16_t>(bx), static_cast<std::int16_t>(by), static_cast<std::int16_t>(bz)};
  a.local = {static_cast<int>(g.x() - bx * kBlockDim), static_cast<int>(g.y() - by * kBlockDim),
             static_cast<int>(g.z() - bz * kBlockDim)};
  return a;
}

VoxelAddress world_to_voxel(const Eigen::Vector3d& point, const GridConfig& grid) {
  constexpr double limit = 32768.0 * kBlockDim;
  VoxelIndex g;
  for (int i = 0; i < 3; ++i) {
    const double v = std::floor(point[i] / grid.voxel_size);
    if (!std::isfinite(v) || v < -limit || v >= limit) throw AddressingError("point outside addressable extent");
    g[i] = static_cast<int>(v);
  }
  return split_index(g);
}

BlockPosition world_to_block(const Eigen::Vector3d& point, const GridConfig& grid) {
  return world_to_voxel(point, grid).block;
}

Eigen::Vector3d voxel_min_corner(BlockPosition b, LocalVoxel l, const GridConfig& grid) {
  return global_index(b, l).cast<double>() * grid.voxel_size;
}

Eigen::Vector3d voxel_center(const VoxelIndex& g, const GridConfig& grid) {
  return (g.cast<double>() + Eigen::Vector3d::Constant(0.5)) * grid.voxel_size;
}

}  // namespace voxstream
