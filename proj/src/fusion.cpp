#include "voxstream/fusion.hpp"

#include "voxstream/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace voxstream {

void FusionConfig::validate() const {
  if (c_a < 1) throw ArgumentError("c_a must be at least 1");
  if (c_w < 0.0) throw ArgumentError("c_w must be non-negative");
  if (max_weight < 1 || max_weight > kMaxWeight) throw ArgumentError("max_weight must lie in [1, 255]");
  if (!(d_max > 0.0)) throw ArgumentError("d_max must be positive");
}

TsdfModel::TsdfModel(const GridConfig& grid)
    : grid_(grid), blocks_(grid.tsdf_bucket_count, grid.tsdf_pool_blocks) {
  grid_.validate();
}

void TsdfModel::mark_touched(BlockPosition p) {
  if (!blocks_.contains(p)) throw ArgumentError("touched block is not allocated");
  if (pending_set_.insert(p).second) pending_.push_back(p);
}

std::vector<BlockPosition> TsdfModel::drain_pending() {
  std::vector<BlockPosition> out;
  out.swap(pending_);
  pending_set_.clear();
  return out;
}

std::vector<BlockPosition> traverse_blocks(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double block_size) {
  const Eigen::Vector3d start = a / block_size;
  const Eigen::Vector3d end = b / block_size;
  const Eigen::Vector3d dir = end - start;

  Eigen::Vector3d first = start.array().floor();
  Eigen::Vector3d last = end.array().floor();
  for (int i = 0; i < 3; ++i)
    if (!std::isfinite(first[i]) || !std::isfinite(last[i])) throw AddressingError("segment is not finite");

  // (parameter, axis, step) for every cell-boundary crossing.
  std::vector<std::tuple<double, int, int>> crossings;
  for (int i = 0; i < 3; ++i) {
    const long c0 = static_cast<long>(first[i]);
    const long c1 = static_cast<long>(last[i]);
    if (c1 > c0) {
      for (long k = c0 + 1; k <= c1; ++k) crossings.emplace_back((k - start[i]) / dir[i], i, +1);
    } else if (c1 < c0) {
      // Moving down, the cell changes once the coordinate drops below k.
      for (long k = c0; k > c1; --k) crossings.emplace_back((k - start[i]) / dir[i], i, -1);
    }
  }
  std::stable_sort(crossings.begin(), crossings.end(),
                   [](const auto& l, const auto& r) { return std::get<0>(l) < std::get<0>(r); });

  long cell[3] = {static_cast<long>(first[0]), static_cast<long>(first[1]), static_cast<long>(first[2])};
  std::vector<BlockPosition> out;
  out.reserve(crossings.size() + 1);
  auto emit = [&] {
    if (!block_in_range(cell[0], cell[1], cell[2])) throw AddressingError("segment leaves addressable extent");
    out.push_back({static_cast<std::int16_t>(cell[0]), static_cast<std::int16_t>(cell[1]),
                   static_cast<std::int16_t>(cell[2])});
  };
  emit();
  for (const auto& [s, axis, step] : crossings) {
    cell[axis] += step;
    emit();
  }
  return out;
}

AllocationResult allocate_blocks(TsdfModel& m, const DepthFrame& f, const Intrinsics& k, const FusionConfig& cfg) {
  cfg.validate();
  if (f.width != k.width || f.height != k.height) throw ArgumentError("frame and intrinsics disagree on size");
  const Eigen::Matrix3d rot = f.rotation();
  const Eigen::Vector3d trans = f.translation();
  const double trunc = m.grid().truncation;
  const double block_size = m.grid().block_size();

  AllocationResult result;
  for (int v = 0; v < f.height; v += cfg.c_a) {
    for (int u = 0; u < f.width; u += cfg.c_a) {
      ++result.candidate_pixels;
      const double d = f.depth_at(u, v);
      if (!(d > 0.0) || d > cfg.d_max) continue;
      ++result.traced_pixels;
      const Eigen::Vector3d pc = k.back_project(u, v, d);
      const Eigen::Vector3d pw = rot * pc + trans;
      const Eigen::Vector3d ray = rot * pc.normalized();
      for (const BlockPosition& p : traverse_blocks(pw - trunc * ray, pw + trunc * ray, block_size)) {
        if (m.blocks().insert(p).second) result.allocated.push_back(p);
      }
    }
  }
  return result;
}

void fuse_sample(TsdfVoxel& v, double sdf, const Rgb& color, int max_weight) {
  const double w = v.w;
  const double s = std::min(sdf, 1.0);
  const double d = v.w == 0 ? s : (w * v.distance() + s) / (w + 1.0);
  v.d = encode_tsdf(d);
  for (int i = 0; i < 3; ++i) {
    const double c = (w * v.c[i] + color[i]) / (w + 1.0);
    v.c[i] = static_cast<std::uint8_t>(std::clamp(std::lround(c), 0L, 255L));
  }
  v.w = static_cast<std::uint16_t>(std::min<int>(v.w + 1, max_weight));
}

std::size_t integrate_frame(TsdfModel& m, const DepthFrame& f, const Intrinsics& k, const FusionConfig& cfg) {
  cfg.validate();
  if (f.width != k.width || f.height != k.height) throw ArgumentError("frame and intrinsics disagree on size");
  const GridConfig& grid = m.grid();
  const Eigen::Matrix3d rot_t = f.rotation().transpose();
  const Eigen::Vector3d trans = f.translation();
  const double vs = grid.voxel_size;
  const double bs = grid.block_size();
  const double half_diag = 0.5 * std::sqrt(3.0) * bs;
  const double inv_trunc = 1.0 / grid.truncation;
  const double z_limit = cfg.d_max + grid.truncation + half_diag;
  const Eigen::Vector3d step_x = rot_t.col(0) * vs;
  const Eigen::Vector3d step_y = rot_t.col(1) * vs;
  const Eigen::Vector3d step_z = rot_t.col(2) * vs;

  std::size_t updated = 0;
  std::vector<BlockPosition> touched;
  m.blocks().for_each([&](BlockPosition pos, TsdfBlock& block) {
    const Eigen::Vector3d origin(pos.x * bs, pos.y * bs, pos.z * bs);
    const Eigen::Vector3d center_cam = rot_t * (origin + Eigen::Vector3d::Constant(0.5 * bs) - trans);
    if (center_cam.z() < -half_diag || center_cam.z() > z_limit) return;
    if (center_cam.z() > half_diag) {
      const double zr = center_cam.z() - half_diag;
      const double ru = k.fx * half_diag / zr;
      const double rv = k.fy * half_diag / zr;
      const double u = k.fx * center_cam.x() / center_cam.z() + k.cx;
      const double v = k.fy * center_cam.y() / center_cam.z() + k.cy;
      if (u + ru < -0.5 || u - ru > k.width - 0.5 || v + rv < -0.5 || v - rv > k.height - 0.5) return;
    }

    const Eigen::Vector3d base = rot_t * (origin + Eigen::Vector3d::Constant(0.5 * vs) - trans);
    std::size_t block_updates = 0;
    for (int z = 0; z < kBlockDim; ++z) {
      for (int y = 0; y < kBlockDim; ++y) {
        Eigen::Vector3d cam = base + y * step_y + z * step_z;
        for (int x = 0; x < kBlockDim; ++x, cam += step_x) {
          if (!(cam.z() > 0.0)) continue;
          const long u = std::lround(k.fx * cam.x() / cam.z() + k.cx);
          const long v = std::lround(k.fy * cam.y() / cam.z() + k.cy);
          if (u < 0 || v < 0 || u >= k.width || v >= k.height) continue;
          const std::size_t pix = static_cast<std::size_t>(v) * f.width + static_cast<std::size_t>(u);
          const double d = f.depth[pix];
          if (!(d > 0.0) || d > cfg.d_max) continue;
          const double sdf = (d - cam.z()) * inv_trunc;
          if (sdf < -1.0) continue;
          fuse_sample(block.at(x, y, z), sdf, f.color[pix], cfg.max_weight);
          ++block_updates;
        }
      }
    }
    if (block_updates > 0) {
      updated += block_updates;
      touched.push_back(pos);
    }
  });
  for (const BlockPosition& p : touched) m.mark_touched(p);
  return updated;
}

namespace {

bool stable(const TsdfVoxel* v, double c_w) { return v != nullptr && v->w > 0 && v->w >= c_w; }

}  // namespace

std::optional<double> sample_tsdf(const BlockHashMap<TsdfVoxel>& blocks, const GridConfig& grid,
                                  const Eigen::Vector3d& p, double c_w) {
  const Eigen::Vector3d q = p / grid.voxel_size - Eigen::Vector3d::Constant(0.5);
  const Eigen::Vector3d fl = q.array().floor();
  if (!fl.allFinite() || fl.cwiseAbs().maxCoeff() > 32768.0 * kBlockDim) return std::nullopt;
  const VoxelIndex base = fl.cast<int>();
  const Eigen::Vector3d t = q - fl;
  double acc = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const TsdfVoxel* v = find_voxel(blocks, VoxelIndex(base + VoxelIndex(dx, dy, dz)));
    if (!stable(v, c_w)) return std::nullopt;
    const double wgt = (dx ? t.x() : 1.0 - t.x()) * (dy ? t.y() : 1.0 - t.y()) * (dz ? t.z() : 1.0 - t.z());
    acc += wgt * v->distance();
  }
  return acc;
}

PreviewImages raycast_preview(const TsdfModel& m, const Eigen::Matrix4d& pose, const Intrinsics& k,
                              const FusionConfig& cfg) {
  const GridConfig& grid = m.grid();
  const auto& blocks = m.blocks();
  PreviewImages img;
  img.width = k.width;
  img.height = k.height;
  const auto n = static_cast<std::size_t>(k.width) * k.height;
  img.depth.assign(n, 0.0f);
  img.normals.assign(n, Eigen::Vector3f::Zero());
  img.color.assign(n, Rgb{0, 0, 0});
  if (blocks.empty()) return img;

  const Eigen::Matrix3d rot = pose.topLeftCorner<3, 3>();
  const Eigen::Vector3d origin = pose.topRightCorner<3, 1>();
  const double step = 0.5 * grid.truncation;
  const double bs = grid.block_size();
  const double vs = grid.voxel_size;

  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Eigen::Vector3d dir_cam = k.back_project(u, v, 1.0).normalized();
      const Eigen::Vector3d dir = rot * dir_cam;
      const double t_max = cfg.d_max / dir_cam.z() + grid.truncation;
      double t = 0.5 * vs;
      double prev = std::numeric_limits<double>::quiet_NaN();  // NaN: previous sample unusable
      double t_prev = 0.0;
      while (t < t_max) {
        const Eigen::Vector3d p = origin + t * dir;
        BlockPosition bp;
        try {
          bp = world_to_block(p, grid);
        } catch (const AddressingError&) {
          break;
        }
        if (!blocks.contains(bp)) {
          // Jump to where the ray leaves this unallocated block.
          double t_exit = t_max;
          const double lo[3] = {bp.x * bs, bp.y * bs, bp.z * bs};
          for (int i = 0; i < 3; ++i) {
            if (dir[i] > 0.0) t_exit = std::min(t_exit, (lo[i] + bs - origin[i]) / dir[i]);
            else if (dir[i] < 0.0) t_exit = std::min(t_exit, (lo[i] - origin[i]) / dir[i]);
          }
          t = std::max(t + 1e-6, t_exit + 1e-6);
          prev = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        const std::optional<double> cur = sample_tsdf(blocks, grid, p, cfg.c_w);
        if (cur && prev > 0.0 && *cur <= 0.0) {
          const double t_hit = t_prev + (t - t_prev) * (prev / (prev - *cur));
          const Eigen::Vector3d hit = origin + t_hit * dir;
          const std::size_t i = static_cast<std::size_t>(v) * k.width + u;
          img.depth[i] = static_cast<float>(t_hit * dir_cam.z());
          Eigen::Vector3d grad;
          bool have_grad = true;
          for (int a = 0; a < 3 && have_grad; ++a) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[a] = vs;
            const auto hi = sample_tsdf(blocks, grid, hit + e, cfg.c_w);
            const auto lo = sample_tsdf(blocks, grid, hit - e, cfg.c_w);
            if (hi && lo) grad[a] = *hi - *lo;
            else have_grad = false;
          }
          if (have_grad && grad.norm() > 0.0) img.normals[i] = (rot.transpose() * grad.normalized()).cast<float>();
          const auto g = VoxelIndex((hit / vs).array().floor().cast<int>());
          if (const TsdfVoxel* vox = find_voxel(blocks, g)) img.color[i] = vox->c;
          break;
        }
        prev = cur ? *cur : std::numeric_limits<double>::quiet_NaN();
        t_prev = t;
        t += step;
      }
    }
  }
  return img;
}

}  // namespace voxstream
