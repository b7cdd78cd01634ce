#pragma once

#include "voxstream/block_hash_map.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace voxstream {

/// One cell corner as seen by Marching Cubes. w == 0 means unobserved or
/// outside the allocated model.
struct CornerState {
  double d = 1.0;
  std::uint16_t w = 0;
};

/// Case index with bit k set iff corner k has d < 0. A cell with any corner
/// that is unobserved or below the stability threshold c_w yields 0.
std::uint8_t mc_index(std::span<const CornerState, 8> corners, double c_w);

struct McBlockResult {
  McBlock voxels;
  bool flag = false;  // at least one cell produces reliable triangles
};

/// Marching Cubes over the 512 cells anchored in block p, reading corners
/// from the seven following neighbour blocks where needed. Throws
/// ArgumentError if p is not allocated.
McBlockResult compute_block_mc(BlockPosition p, const BlockHashMap<TsdfVoxel>& tsdf, double c_w);

/// Client-side Marching Cubes block model.
class ClientMesh {
 public:
  explicit ClientMesh(const GridConfig& grid)
      : grid_(grid), blocks_(grid.mc_bucket_count, grid.mc_pool_blocks) {}

  const GridConfig& grid() const { return grid_; }
  const BlockHashMap<McVoxel>& blocks() const { return blocks_; }
  BlockHashMap<McVoxel>& blocks() { return blocks_; }
  std::size_t size() const { return blocks_.size(); }

 private:
  GridConfig grid_;
  BlockHashMap<McVoxel> blocks_;
};

/// Replaces (or inserts) the block at p.
void integrate_block(ClientMesh& mesh, BlockPosition p, const McBlock& block);

struct MeshVertex {
  Eigen::Vector3f position;
  Rgb color;

  friend bool operator==(const MeshVertex& a, const MeshVertex& b) {
    return a.position == b.position && a.color == b.color;
  }
};

/// Unindexed triangle soup, three consecutive vertices per triangle.
struct TriangleMesh {
  std::vector<MeshVertex> vertices;

  std::size_t triangle_count() const { return vertices.size() / 3; }
  bool empty() const { return vertices.empty(); }
};

/// Edge-midpoint vertex of a cell edge, in world space. Computed from the
/// integer doubled coordinate so shared edges are bitwise identical.
Eigen::Vector3f edge_vertex(const VoxelIndex& anchor, int edge, double voxel_size);

/// Triangles of every cell with a surface crossing. Blocks are visited in
/// sorted position order and cells in linear order.
TriangleMesh extract_triangles(const BlockHashMap<McVoxel>& blocks, const GridConfig& grid);
TriangleMesh extract_triangles(const ClientMesh& mesh);

/// Triangles of one cell with case index `index` anchored at `anchor`.
void append_cell_triangles(TriangleMesh& out, const VoxelIndex& anchor, std::uint8_t index, const Rgb& color,
                           double voxel_size);

}  // namespace voxstream
