#pragma once

#include "voxstream/block_hash_map.hpp"
#include "voxstream/preprocess.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <unordered_set>
#include <vector>

namespace voxstream {

struct FusionConfig {
  int c_a = 4;             // allocation stride in pixels
  int max_weight = kMaxWeight;
  double c_w = 2.0;        // stability threshold on the fusion weight
  double d_max = 5.0;      // meters

  void validate() const;
};

/// The reconstruction-side TSDF model plus the queue of blocks touched since
/// the last drain, which is what gets shipped to the server.
class TsdfModel {
 public:
  explicit TsdfModel(const GridConfig& grid);

  const GridConfig& grid() const { return grid_; }
  BlockHashMap<TsdfVoxel>& blocks() { return blocks_; }
  const BlockHashMap<TsdfVoxel>& blocks() const { return blocks_; }

  /// Adds p to the pending stream unless already queued. p must be allocated.
  void mark_touched(BlockPosition p);
  const std::vector<BlockPosition>& pending() const { return pending_; }
  /// Returns every touched position once, in first-touch order, and resets the queue.
  std::vector<BlockPosition> drain_pending();

 private:
  GridConfig grid_;
  BlockHashMap<TsdfVoxel> blocks_;
  std::vector<BlockPosition> pending_;
  std::unordered_set<BlockPosition> pending_set_;
};

/// All blocks (half-open cells of edge `block_size`) met by the segment a-b,
/// in traversal order from a. Crossings are computed per axis and merged.
std::vector<BlockPosition> traverse_blocks(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double block_size);

struct AllocationResult {
  std::vector<BlockPosition> allocated;  // newly allocated, in allocation order
  std::size_t candidate_pixels = 0;      // pixels on the c_a lattice
  std::size_t traced_pixels = 0;         // candidates with valid depth <= d_max
};

/// Allocates every block on the truncation segment of each valid sample on
/// the c_a-strided pixel lattice.
AllocationResult allocate_blocks(TsdfModel& m, const DepthFrame& f, const Intrinsics& k, const FusionConfig& cfg);

/// Running-average update of a single voxel with one sample (sdf in
/// truncation units, already known to be >= -1).
void fuse_sample(TsdfVoxel& v, double sdf, const Rgb& color, int max_weight);

/// Fuses the full-resolution frame into every allocated block in view.
/// Returns the number of voxel updates; touched blocks are queued for streaming.
std::size_t integrate_frame(TsdfModel& m, const DepthFrame& f, const Intrinsics& k, const FusionConfig& cfg);

struct PreviewImages {
  int width = 0;
  int height = 0;
  std::vector<float> depth;  // 0 = no stable surface
  std::vector<Eigen::Vector3f> normals;
  std::vector<Rgb> color;

  float depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
};

/// Trilinear TSDF sample at a world point. Empty if any of the eight
/// contributing voxels is missing, unobserved, or has weight below c_w.
std::optional<double> sample_tsdf(const BlockHashMap<TsdfVoxel>& blocks, const GridConfig& grid,
                                  const Eigen::Vector3d& p, double c_w);

/// Ray-marched preview that only reports zero crossings between stable samples.
PreviewImages raycast_preview(const TsdfModel& m, const Eigen::Matrix4d& pose, const Intrinsics& k,
                              const FusionConfig& cfg);

}  // namespace voxstream
