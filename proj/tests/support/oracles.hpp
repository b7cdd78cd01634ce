#pragma once

// Straightforward reference implementations used to check the optimized code.

#include "voxstream/fusion.hpp"
#include "voxstream/meshing.hpp"
#include "voxstream/preprocess.hpp"
#include "voxstream/server.hpp"

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace voxstream::oracle {

/// Per-pixel evaluation of the outlier set over the full window.
DepthFrame depth_filter(const DepthFrame& f, double c_d, double c_h, int radius);

/// Random frame with holes, blobs and depth steps.
DepthFrame random_depth_frame(std::mt19937_64& rng, int width, int height);

/// Blocks whose closed cell box meets the segment a-b (slab clipping over
/// a bounding range of candidate blocks).
std::set<BlockPosition> segment_blocks(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double block_size);

/// Case index computed from eight explicitly looked-up corners.
std::uint8_t cell_index(const std::map<BlockPosition, TsdfBlock>& tsdf, const VoxelIndex& anchor, double c_w);

/// Server model that recomputes every MC block after every batch.
class NaiveServer {
 public:
  explicit NaiveServer(bool prune, double c_w) : prune_(prune), c_w_(prune ? c_w : 0.0) {}

  std::set<BlockPosition> integrate(const std::vector<BlockPosition>& positions, const std::vector<TsdfBlock>& data);

  const std::map<BlockPosition, McBlock>& mc() const { return mc_; }
  const std::set<BlockPosition>& update_set() const { return update_set_; }
  const std::map<BlockPosition, TsdfBlock>& tsdf() const { return tsdf_; }

 private:
  McBlock compute(BlockPosition p, bool& flag) const;

  bool prune_;
  double c_w_;
  std::map<BlockPosition, TsdfBlock> tsdf_;
  std::map<BlockPosition, McBlock> mc_;
  std::set<BlockPosition> update_set_;
};

/// Fills blocks [lo, hi) with the signed distance to the plane n.x = offset
/// (clamped at the truncation) and constant weight.
BlockHashMap<TsdfVoxel> plane_tsdf(const GridConfig& grid, const Eigen::Vector3d& n, double offset,
                                   const Eigen::Vector3i& lo, const Eigen::Vector3i& hi, std::uint16_t weight);

/// Edges of the triangle soup used by exactly one triangle.
std::vector<std::pair<Eigen::Vector3f, Eigen::Vector3f>> open_edges(const TriangleMesh& mesh);

}  // namespace voxstream::oracle

namespace voxstream::oracle {

struct BatchSequence {
  std::vector<std::vector<BlockPosition>> positions;
  std::vector<std::vector<TsdfBlock>> blocks;
};

/// Batches of blocks around a random plane plus random clutter, with mixed
/// weights (including unobserved and below-threshold blocks). At most
/// `max_blocks` blocks in total.
BatchSequence random_batch_sequence(std::mt19937_64& rng, std::size_t max_blocks);

/// Runs the sequence through ServerState and NaiveServer; empty on success,
/// otherwise a description of the first difference.
std::string compare_with_naive(const BatchSequence& seq, bool prune, double c_w);

}  // namespace voxstream::oracle
