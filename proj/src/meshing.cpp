#include "voxstream/meshing.hpp"

#include "voxstream/errors.hpp"
#include "voxstream/marching_cubes.hpp"

#include <algorithm>
#include <array>

namespace voxstream {

std::uint8_t mc_index(std::span<const CornerState, 8> corners, double c_w) {
  unsigned index = 0;
  for (int k = 0; k < 8; ++k) {
    const CornerState& c = corners[static_cast<std::size_t>(k)];
    if (c.w == 0 || c.w < c_w) return 0;
    if (c.d < 0.0) index |= 1u << k;
  }
  return static_cast<std::uint8_t>(index);
}

McBlockResult compute_block_mc(BlockPosition p, const BlockHashMap<TsdfVoxel>& tsdf, double c_w) {
  const TsdfBlock* self = tsdf.find(p);
  if (self == nullptr) throw ArgumentError("block is not allocated in the TSDF model");

  // neighbours[ox + 2*oy + 4*oz] is the block at p + (ox, oy, oz).
  std::array<const TsdfBlock*, 8> neighbours{};
  for (int o = 0; o < 8; ++o) {
    const long nx = p.x + (o & 1), ny = p.y + ((o >> 1) & 1), nz = p.z + ((o >> 2) & 1);
    neighbours[static_cast<std::size_t>(o)] =
        block_in_range(nx, ny, nz) ? tsdf.find({static_cast<std::int16_t>(nx), static_cast<std::int16_t>(ny),
                                                static_cast<std::int16_t>(nz)})
                                   : nullptr;
  }

  // Padded 9^3 corner grid: bit 0 = negative distance, bit 1 = stable weight.
  constexpr int kPad = kBlockDim + 1;
  std::array<std::uint8_t, kPad * kPad * kPad> grid{};
  for (int z = 0; z < kPad; ++z) {
    for (int y = 0; y < kPad; ++y) {
      for (int x = 0; x < kPad; ++x) {
        const int o = (x >= kBlockDim ? 1 : 0) | (y >= kBlockDim ? 2 : 0) | (z >= kBlockDim ? 4 : 0);
        const TsdfBlock* b = neighbours[static_cast<std::size_t>(o)];
        if (b == nullptr) continue;
        const TsdfVoxel& v = b->at(x % kBlockDim, y % kBlockDim, z % kBlockDim);
        const bool stable = v.w != 0 && !(v.w < c_w);
        grid[static_cast<std::size_t>((z * kPad + y) * kPad + x)] =
            static_cast<std::uint8_t>((v.d < 0 ? 1 : 0) | (stable ? 2 : 0));
      }
    }
  }

  McBlockResult result;
  std::array<int, 8> corner_step;
  for (int k = 0; k < 8; ++k) {
    const auto off = mc::corner_offset(k);
    corner_step[static_cast<std::size_t>(k)] = (off[2] * kPad + off[1]) * kPad + off[0];
  }
  for (int z = 0; z < kBlockDim; ++z) {
    for (int y = 0; y < kBlockDim; ++y) {
      for (int x = 0; x < kBlockDim; ++x) {
        const int base = (z * kPad + y) * kPad + x;
        unsigned index = 0;
        bool stable = true;
        for (int k = 0; k < 8; ++k) {
          const std::uint8_t g = grid[static_cast<std::size_t>(base + corner_step[static_cast<std::size_t>(k)])];
          stable = stable && (g & 2);
          index |= static_cast<unsigned>(g & 1) << k;
        }
        McVoxel& out = result.voxels.at(x, y, z);
        out.index = stable ? static_cast<std::uint8_t>(index) : 0;
        out.c = self->at(x, y, z).c;
        if (out.has_surface()) result.flag = true;
      }
    }
  }
  return result;
}

void integrate_block(ClientMesh& mesh, BlockPosition p, const McBlock& block) {
  mesh.blocks().insert_or_assign(p, block);
}

Eigen::Vector3f edge_vertex(const VoxelIndex& anchor, int edge, double voxel_size) {
  const auto m2 = mc::edge_midpoint2(edge);
  const double half = 0.5 * voxel_size;
  Eigen::Vector3f v;
  for (int i = 0; i < 3; ++i) {
    const long doubled = 2L * anchor[i] + 1 + m2[static_cast<std::size_t>(i)];
    v[i] = static_cast<float>(static_cast<double>(doubled) * half);
  }
  return v;
}

void append_cell_triangles(TriangleMesh& out, const VoxelIndex& anchor, std::uint8_t index, const Rgb& color,
                           double voxel_size) {
  const auto& row = mc::kTriangleTable[index];
  for (int i = 0; i < 16 && row[static_cast<std::size_t>(i)] >= 0; ++i)
    out.vertices.push_back({edge_vertex(anchor, row[static_cast<std::size_t>(i)], voxel_size), color});
}

TriangleMesh extract_triangles(const BlockHashMap<McVoxel>& blocks, const GridConfig& grid) {
  std::vector<BlockPosition> order = blocks.positions();
  std::sort(order.begin(), order.end());
  TriangleMesh mesh;
  for (const BlockPosition& p : order) {
    const McBlock& block = *blocks.find(p);
    for (int i = 0; i < kBlockVoxels; ++i) {
      const McVoxel& v = block[i];
      if (!v.has_surface()) continue;
      append_cell_triangles(mesh, global_index(p, local_from_linear(i)), v.index, v.c, grid.voxel_size);
    }
  }
  return mesh;
}

TriangleMesh extract_triangles(const ClientMesh& mesh) { return extract_triangles(mesh.blocks(), mesh.grid()); }

}  // namespace voxstream
