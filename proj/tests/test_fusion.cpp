#include "support/oracles.hpp"
#include "voxstream/errors.hpp"
#include "voxstream/fusion.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace voxstream;

namespace {

Intrinsics small_camera() {
  Intrinsics k;
  k.width = 64;
  k.height = 48;
  k.fx = k.fy = 60.0;
  k.cx = 31.5;
  k.cy = 23.5;
  return k;
}

DepthFrame plane_frame(const Intrinsics& k, float depth) {
  DepthFrame f = DepthFrame::blank(k.width, k.height);
  std::fill(f.depth.begin(), f.depth.end(), depth);
  std::fill(f.color.begin(), f.color.end(), Rgb{10, 20, 30});
  return f;
}

GridConfig small_grid() {
  GridConfig g;
  g.tsdf_bucket_count = 1 << 14;
  g.mc_bucket_count = 1 << 14;
  return g;
}

}  // namespace

TEST_CASE("running average examples") {
  TsdfVoxel v;
  fuse_sample(v, 0.5, {100, 0, 0}, 255);
  CHECK(v.w == 1);
  CHECK(v.distance() == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(v.c == Rgb{100, 0, 0});

  TsdfVoxel a;
  fuse_sample(a, 0.4, {0, 0, 0}, 255);
  fuse_sample(a, 0.8, {0, 0, 0}, 255);
  CHECK(a.w == 2);
  CHECK(std::abs(a.distance() - 0.6) <= 2.0 / 32767);

  TsdfVoxel s{encode_tsdf(0.0), 255, {0, 0, 0}};
  fuse_sample(s, 1.0, {0, 0, 0}, 255);
  CHECK(s.w == 255);
  CHECK(std::abs(s.distance() - 1.0 / 256) <= 1.0 / 32767);

  TsdfVoxel c;
  fuse_sample(c, 3.0, {0, 0, 0}, 255);
  CHECK(c.distance() == 1.0);
}

TEST_CASE("fusion is permutation invariant") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> N(1, 255);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = N(rng);
    std::vector<double> samples(static_cast<std::size_t>(n));
    for (double& s : samples) s = U(rng);
    std::vector<double> shuffled = samples;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    TsdfVoxel a, b;
    for (double s : samples) fuse_sample(a, s, {0, 0, 0}, 255);
    for (double s : shuffled) fuse_sample(b, s, {0, 0, 0}, 255);
    REQUIRE(a.w == b.w);
    REQUIRE(a.w == n);
    REQUIRE(std::abs(a.distance() - b.distance()) <= n * 2.0 / 32767);
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n;
    REQUIRE(std::abs(a.distance() - mean) <= n * 1.0 / 32767);
  }
}

TEST_CASE("segment traversal matches the brute-force block test") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> P(-0.3, 0.3), L(-0.15, 0.15);
  const double bs = 0.04;
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Vector3d a(P(rng), P(rng), P(rng));
    const Eigen::Vector3d b = a + Eigen::Vector3d(L(rng), L(rng), L(rng));
    const std::vector<BlockPosition> walked = traverse_blocks(a, b, bs);
    const std::set<BlockPosition> got(walked.begin(), walked.end());
    REQUIRE(got.size() == walked.size());
    REQUIRE(got == oracle::segment_blocks(a, b, bs));
    CHECK(walked.front() == world_to_block(a, GridConfig{}));
    for (std::size_t i = 1; i < walked.size(); ++i) {
      const int step = std::abs(walked[i].x - walked[i - 1].x) + std::abs(walked[i].y - walked[i - 1].y) +
                       std::abs(walked[i].z - walked[i - 1].z);
      CHECK(step == 1);
    }
  }
}

TEST_CASE("allocation stride") {
  Intrinsics k;
  TsdfModel m(small_grid());
  DepthFrame f = DepthFrame::blank(640, 480);
  std::fill(f.depth.begin(), f.depth.end(), 2.0f);
  FusionConfig cfg;
  const AllocationResult r = allocate_blocks(m, f, k, cfg);
  CHECK(r.candidate_pixels == 19200);
  CHECK(r.traced_pixels == 19200);
  CHECK(r.allocated.size() == m.blocks().size());
}

TEST_CASE("single axis-aligned sample allocates the segment's blocks") {
  Intrinsics k = small_camera();
  // Principal point off the pixel so the ray avoids block boundaries at x = y = 0.
  k.cx = 31.5;
  k.cy = 23.5;
  TsdfModel m(small_grid());
  DepthFrame f = DepthFrame::blank(k.width, k.height);
  f.depth[static_cast<std::size_t>(24) * k.width + 32] = 1.01f;
  FusionConfig cfg;
  cfg.c_a = 1;
  const AllocationResult r = allocate_blocks(m, f, k, cfg);
  CHECK(r.traced_pixels == 1);
  const double d = static_cast<double>(1.01f);
  const Eigen::Vector3d p = k.back_project(32, 24, d), dir = p.normalized();
  const auto expected = oracle::segment_blocks(p - 0.06 * dir, p + 0.06 * dir, 0.04);
  CHECK(expected.size() == 4);
  CHECK(std::set<BlockPosition>(r.allocated.begin(), r.allocated.end()) == expected);
}

TEST_CASE("allocation stride 1 covers stride 4 and every truncation segment") {
  const Intrinsics k = small_camera();
  std::mt19937_64 rng(4);
  DepthFrame f = oracle::random_depth_frame(rng, k.width, k.height);
  TsdfModel dense(small_grid()), sparse(small_grid());
  FusionConfig c1, c4;
  c1.c_a = 1;
  c4.c_a = 4;
  allocate_blocks(dense, f, k, c1);
  allocate_blocks(sparse, f, k, c4);
  sparse.blocks().for_each([&](BlockPosition p, const TsdfBlock&) { REQUIRE(dense.blocks().contains(p)); });

  const GridConfig g = small_grid();
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const double d = f.depth_at(u, v);
      if (!(d > 0.0)) continue;
      const Eigen::Vector3d p = k.back_project(u, v, d);
      const Eigen::Vector3d r = p.normalized();
      for (double s = -g.truncation; s <= g.truncation; s += g.voxel_size * 0.5)
        REQUIRE(dense.blocks().contains(world_to_block(p + s * r, g)));
    }
}

TEST_CASE("integration and pending stream") {
  const Intrinsics k = small_camera();
  TsdfModel m(small_grid());
  const DepthFrame f = plane_frame(k, 1.0f);
  FusionConfig cfg;
  allocate_blocks(m, f, k, cfg);
  const std::size_t n = integrate_frame(m, f, k, cfg);
  CHECK(n > 0);
  for (const BlockPosition& p : m.pending()) CHECK(m.blocks().contains(p));
  const auto drained = m.drain_pending();
  CHECK(std::set<BlockPosition>(drained.begin(), drained.end()).size() == drained.size());
  CHECK(m.pending().empty());
  CHECK(m.drain_pending().empty());
  CHECK_THROWS_AS(m.mark_touched({100, 100, 100}), ArgumentError);

  // Voxel centered at z = 1.0775 lies beyond the truncation band behind the surface.
  const TsdfVoxel* behind = find_voxel(m.blocks(), VoxelIndex(0, 0, 215));
  REQUIRE(behind != nullptr);
  CHECK(behind->w == 0);
  const TsdfVoxel* front = find_voxel(m.blocks(), VoxelIndex(0, 0, 195));
  REQUIRE(front != nullptr);
  CHECK(front->w == 1);
}

TEST_CASE("raycast of a fused fronto-parallel plane") {
  const Intrinsics k = small_camera();
  const DepthFrame f = plane_frame(k, 1.0f);
  FusionConfig cfg;
  cfg.c_a = 1;

  TsdfModel once(small_grid());
  allocate_blocks(once, f, k, cfg);
  integrate_frame(once, f, k, cfg);
  const PreviewImages p1 = raycast_preview(once, Eigen::Matrix4d::Identity(), k, cfg);
  CHECK(std::all_of(p1.depth.begin(), p1.depth.end(), [](float d) { return d == 0.0f; }));

  TsdfModel twice = once;
  integrate_frame(twice, f, k, cfg);
  const PreviewImages p2 = raycast_preview(twice, Eigen::Matrix4d::Identity(), k, cfg);
  std::size_t valid = 0, close = 0;
  for (std::size_t i = 0; i < p2.depth.size(); ++i) {
    if (p2.depth[i] == 0.0f) continue;
    ++valid;
    if (std::abs(p2.depth[i] - 1.0f) <= 0.005f) ++close;
  }
  CHECK(valid > p2.depth.size() / 2);
  CHECK(close >= 0.99 * static_cast<double>(valid));
  const Eigen::Vector3f n = p2.normals[static_cast<std::size_t>(24) * k.width + 32];
  CHECK(n.z() == doctest::Approx(-1.0f).epsilon(0.01));

  TsdfModel empty(small_grid());
  const PreviewImages p0 = raycast_preview(empty, Eigen::Matrix4d::Identity(), k, cfg);
  CHECK(std::all_of(p0.depth.begin(), p0.depth.end(), [](float d) { return d == 0.0f; }));
}

TEST_CASE("fusion config validation") {
  FusionConfig cfg;
  cfg.c_a = 0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.c_w = -1;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}
