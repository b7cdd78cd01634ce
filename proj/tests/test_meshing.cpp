#include "support/oracles.hpp"
#include "voxstream/errors.hpp"
#include "voxstream/fusion.hpp"
#include "voxstream/marching_cubes.hpp"
#include "voxstream/meshing.hpp"

#include <doctest.h>

#include <map>
#include <random>
#include <set>

using namespace voxstream;

namespace {

std::array<CornerState, 8> uniform_corners(double d, std::uint16_t w) {
  std::array<CornerState, 8> c;
  c.fill(CornerState{d, w});
  return c;
}

std::map<BlockPosition, TsdfBlock> to_map(const BlockHashMap<TsdfVoxel>& m) {
  std::map<BlockPosition, TsdfBlock> out;
  m.for_each([&](BlockPosition p, const TsdfBlock& b) { out.emplace(p, b); });
  return out;
}

// Bit permutation between this corner order and the x-y-z-cycling order of
// the classic published table (corners 2 and 3, 6 and 7 swapped).
int to_classic(int index) {
  int out = 0;
  const int map[8] = {0, 1, 3, 2, 4, 5, 7, 6};
  for (int k = 0; k < 8; ++k)
    if (index & (1 << k)) out |= 1 << map[k];
  return out;
}

}  // namespace

TEST_CASE("mc_index examples") {
  CHECK(mc_index(uniform_corners(0.5, 5), 2.0) == 0);
  CHECK(mc_index(uniform_corners(-0.5, 5), 2.0) == 255);
  std::array<CornerState, 8> c = uniform_corners(0.5, 5);
  for (int k = 0; k < 4; ++k) c[static_cast<std::size_t>(k)].d = -0.5;
  CHECK(mc_index(c, 2.0) == 15);
  c[5].w = 1;
  CHECK(mc_index(c, 2.0) == 0);
  CHECK(mc_index(c, 1.0) == 15);
  c[5].w = 0;
  CHECK(mc_index(c, 0.0) == 0);
}

TEST_CASE("case table soundness for all 256 indices") {
  std::size_t total = 0;
  for (int index = 0; index < 256; ++index) {
    const auto& row = mc::kTriangleTable[static_cast<std::size_t>(index)];
    std::set<int> crossed, used;
    for (int e = 0; e < 12; ++e) {
      const auto [a, b] = mc::kEdgeCorners[static_cast<std::size_t>(e)];
      if (((index >> a) & 1) != ((index >> b) & 1)) crossed.insert(e);
    }
    int n = 0;
    std::map<std::pair<int, int>, int> edge_use;
    while (n < 16 && row[static_cast<std::size_t>(n)] >= 0) ++n;
    REQUIRE(n % 3 == 0);
    CHECK(n / 3 == mc::triangle_count(index));
    for (int i = 0; i < n; i += 3) {
      for (int j = 0; j < 3; ++j) {
        const int e = row[static_cast<std::size_t>(i + j)];
        used.insert(e);
        const int f = row[static_cast<std::size_t>(i + (j + 1) % 3)];
        ++edge_use[{std::min(e, f), std::max(e, f)}];
      }
    }
    CHECK(used == crossed);
    // Segments used once form the polygon boundary and must lie on a cube
    // face: both cell edges then share a face, i.e. their midpoints agree
    // on an extreme coordinate (0 or 2 in doubled units).
    for (const auto& [seg, count] : edge_use) {
      CHECK(count <= 2);
      if (count == 1) {
        const auto ma = mc::edge_midpoint2(seg.first), mb = mc::edge_midpoint2(seg.second);
        bool on_face = false;
        for (int axis = 0; axis < 3; ++axis)
          on_face = on_face || (ma[static_cast<std::size_t>(axis)] == mb[static_cast<std::size_t>(axis)] &&
                                ma[static_cast<std::size_t>(axis)] != 1);
        CHECK(on_face);
      }
    }
    total += static_cast<std::size_t>(n / 3);
  }
  CHECK(mc::triangle_count(0) == 0);
  CHECK(mc::triangle_count(255) == 0);
  CHECK(total > 0);

  // Per-case triangle counts of the first 32 classic cases.
  const int classic[32] = {0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 2,
                           1, 2, 2, 3, 2, 3, 3, 4, 2, 3, 3, 4, 3, 4, 4, 3};
  for (int index = 0; index < 256; ++index) {
    const int c = to_classic(index);
    if (c < 32) CHECK(mc::triangle_count(index) == classic[c]);
  }
}

TEST_CASE("block MC on unobserved space") {
  BlockHashMap<TsdfVoxel> tsdf(64, 64);
  tsdf.insert({0, 0, 0});
  const McBlockResult r = compute_block_mc({0, 0, 0}, tsdf, 2.0);
  CHECK_FALSE(r.flag);
  for (const McVoxel& v : r.voxels.voxels) CHECK(v.index == 0);
  CHECK_THROWS_AS(compute_block_mc({1, 0, 0}, tsdf, 2.0), ArgumentError);
}

TEST_CASE("block MC matches the per-cell evaluator on a tilted plane") {
  GridConfig g;
  for (std::uint16_t w : {std::uint16_t{1}, std::uint16_t{4}}) {
    const auto tsdf = oracle::plane_tsdf(g, {0.3, -0.2, 1.0}, 0.061, {-1, -1, -1}, {3, 3, 3}, w);
    const auto ref = to_map(tsdf);
    bool any_flag = false;
    tsdf.for_each([&](BlockPosition p, const TsdfBlock&) {
      const McBlockResult r = compute_block_mc(p, tsdf, 2.0);
      any_flag = any_flag || r.flag;
      for (int i = 0; i < 512; ++i) {
        const LocalVoxel l = local_from_linear(i);
        REQUIRE(r.voxels.voxels[static_cast<std::size_t>(i)].index == oracle::cell_index(ref, global_index(p, l), 2.0));
      }
    });
    // Weight 1 is below c_w = 2: everything is suppressed.
    CHECK(any_flag == (w >= 2));
  }
}

TEST_CASE("axis-aligned plane gives one slab of crossing cells") {
  GridConfig g;
  // Plane between voxel layers 11 and 12 of block z = 1.
  const double z_plane = (8 + 3 + 1.0) * g.voxel_size;
  const auto tsdf = oracle::plane_tsdf(g, {0, 0, 1}, z_plane, {0, 0, 0}, {2, 2, 3}, 5);
  const McBlockResult r = compute_block_mc({0, 0, 1}, tsdf, 2.0);
  CHECK(r.flag);
  for (int i = 0; i < 512; ++i) {
    const LocalVoxel l = local_from_linear(i);
    const std::uint8_t idx = r.voxels.voxels[static_cast<std::size_t>(i)].index;
    if (l.z == 3) CHECK(idx == 15);
    else CHECK(!McVoxel{idx, {}}.has_surface());
  }
  const McBlockResult below = compute_block_mc({0, 0, 0}, tsdf, 2.0);
  CHECK_FALSE(below.flag);
}

TEST_CASE("I = 15 cell gives the mid-plane quad") {
  TriangleMesh mesh;
  const double vs = 0.005;
  append_cell_triangles(mesh, VoxelIndex(2, 3, 4), 15, {1, 2, 3}, vs);
  REQUIRE(mesh.triangle_count() == 2);
  for (const MeshVertex& v : mesh.vertices) {
    CHECK(v.position.z() == static_cast<float>((2 * 4 + 1 + 1) * vs / 2));
    CHECK(v.color == Rgb{1, 2, 3});
  }
}

TEST_CASE("shared edges produce bitwise identical vertices") {
  const double vs = 0.005;
  // Edge 1 of cell (0,0,0) joins corners (0,1,0)-(1,1,0); it is edge 0 of cell (0,1,0).
  CHECK(edge_vertex(VoxelIndex(0, 0, 0), 1, vs) == edge_vertex(VoxelIndex(0, 1, 0), 0, vs));
  CHECK(edge_vertex(VoxelIndex(7, 7, 7), 11, vs) == edge_vertex(VoxelIndex(8, 7, 7), 10, vs));
  CHECK(edge_vertex(VoxelIndex(-9, 4, 2), 7, vs) == edge_vertex(VoxelIndex(-9, 4, 3), 5, vs));
}

TEST_CASE("watertight across block boundaries") {
  GridConfig g;
  const Eigen::Vector3i lo(-2, -2, -1), hi(2, 2, 2);
  const auto tsdf = oracle::plane_tsdf(g, {0.2, 0.35, 1.0}, 0.013, lo, hi, 3);
  BlockHashMap<McVoxel> mc(1 << 10, 1 << 12);
  tsdf.for_each([&](BlockPosition p, const TsdfBlock&) {
    McBlockResult r = compute_block_mc(p, tsdf, 2.0);
    if (r.flag) mc.insert_or_assign(p, r.voxels);
  });
  const TriangleMesh mesh = extract_triangles(mc, g);
  REQUIRE(mesh.triangle_count() > 100);
  // Cells can only be built where all corners exist, so every open edge
  // must sit on the last cell layer of the allocated region.
  const Eigen::Vector3d lo_w = (lo.cast<double>() * 8.0 + Eigen::Vector3d::Constant(0.5)) * g.voxel_size;
  const Eigen::Vector3d hi_w = (hi.cast<double>() * 8.0 - Eigen::Vector3d::Constant(0.5)) * g.voxel_size;
  const auto open = oracle::open_edges(mesh);
  for (const auto& [a, b] : open) {
    bool boundary = false;
    for (int i = 0; i < 3; ++i) {
      const double ca = a[i], cb = b[i];
      boundary = boundary || (std::abs(ca - lo_w[i]) < 1e-6 && std::abs(cb - lo_w[i]) < 1e-6) ||
                 (std::abs(ca - hi_w[i]) < 1e-6 && std::abs(cb - hi_w[i]) < 1e-6);
    }
    CHECK(boundary);
  }
}

TEST_CASE("client mesh integration") {
  GridConfig g;
  g.mc_bucket_count = 1 << 10;
  ClientMesh mesh(g);
  CHECK(extract_triangles(mesh).empty());
  McBlock b;
  b.voxels[static_cast<std::size_t>(linear_index(1, 1, 1))].index = 15;
  b.voxels[static_cast<std::size_t>(linear_index(2, 1, 1))].index = 1;
  integrate_block(mesh, {0, 0, 0}, b);
  const TriangleMesh once = extract_triangles(mesh);
  CHECK(once.triangle_count() == 3);
  integrate_block(mesh, {0, 0, 0}, b);
  CHECK(extract_triangles(mesh).vertices == once.vertices);

  McBlock other;
  other.voxels[0].index = 3;
  ClientMesh ab(g), ba(g);
  integrate_block(ab, {0, 0, 0}, b);
  integrate_block(ab, {0, 1, 0}, other);
  integrate_block(ba, {0, 1, 0}, other);
  integrate_block(ba, {0, 0, 0}, b);
  CHECK(extract_triangles(ab).vertices == extract_triangles(ba).vertices);

  integrate_block(mesh, {0, 0, 0}, McBlock{});
  CHECK(extract_triangles(mesh).empty());
}
