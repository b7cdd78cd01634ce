#include "voxstream/preprocess.hpp"

#include "voxstream/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace voxstream {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ArgumentError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ArgumentError("image size must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) throw ArgumentError("principal point outside image");
}

std::optional<Eigen::Vector2i> Intrinsics::project(const Eigen::Vector3d& p) const {
  if (!(p.z() > 0.0)) return std::nullopt;
  const double u = fx * p.x() / p.z() + cx;
  const double v = fy * p.y() / p.z() + cy;
  const long iu = std::lround(u);
  const long iv = std::lround(v);
  if (iu < 0 || iv < 0 || iu >= width || iv >= height) return std::nullopt;
  return Eigen::Vector2i(static_cast<int>(iu), static_cast<int>(iv));
}

Intrinsics Intrinsics::scaled(double factor) const {
  Intrinsics k = *this;
  k.fx = fx / factor;
  k.fy = fy / factor;
  k.cx = (cx + 0.5) / factor - 0.5;
  k.cy = (cy + 0.5) / factor - 0.5;
  k.width = static_cast<int>(width / factor);
  k.height = static_cast<int>(height / factor);
  return k;
}

DepthFrame DepthFrame::blank(int width, int height) {
  DepthFrame f;
  f.width = width;
  f.height = height;
  f.depth.assign(static_cast<std::size_t>(width) * height, 0.0f);
  f.color.assign(static_cast<std::size_t>(width) * height, Rgb{0, 0, 0});
  return f;
}

void DepthFrame::validate() const {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (width <= 0 || height <= 0) throw ArgumentError("frame size must be positive");
  if (depth.size() != n || color.size() != n) throw ArgumentError("frame buffers do not match frame size");
  const Eigen::Matrix3d r = rotation();
  if (!(r.transpose() * r).isApprox(Eigen::Matrix3d::Identity(), 1e-5) || std::abs(r.determinant() - 1.0) > 1e-5)
    throw ArgumentError("pose rotation is not orthonormal");
}

int valid_pixel_count(const DepthFrame& f) {
  return static_cast<int>(std::count_if(f.depth.begin(), f.depth.end(), [](float d) { return d > 0.0f; }));
}

void DepthFilterConfig::validate() const {
  if (!(c_d > 0.0)) throw ArgumentError("c_d must be positive");
  if (!(c_h > 0.0 && c_h < 1.0)) throw ArgumentError("c_h must lie in (0, 1)");
  if (radius < 1) throw ArgumentError("filter radius must be at least 1");
}

DepthFrame filter_depth(const DepthFrame& f, const DepthFilterConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height);
  if (f.depth.size() != n || f.color.size() != n) throw ArgumentError("frame buffers do not match frame size");
  const int w = f.width;
  const int h = f.height;
  const int r = cfg.radius;
  const int window = 2 * r + 1;
  if (w < window || h < window) throw ArgumentError("frame smaller than filter window");

  constexpr float kInf = std::numeric_limits<float>::infinity();
  auto idx = [w](int u, int v) { return static_cast<std::size_t>(v) * w + u; };

  // Separable window min/max over valid samples.
  std::vector<float> row_min(n), row_max(n);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      float lo = kInf, hi = -kInf;
      for (int x = std::max(0, u - r); x <= std::min(w - 1, u + r); ++x) {
        const float d = f.depth[idx(x, v)];
        if (d > 0.0f) {
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
      }
      row_min[idx(u, v)] = lo;
      row_max[idx(u, v)] = hi;
    }
  }

  // Summed-area table of valid samples, (w+1) x (h+1).
  std::vector<int> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto sidx = [w](int u, int v) { return static_cast<std::size_t>(v) * (w + 1) + u; };
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      sat[sidx(u + 1, v + 1)] = (f.depth[idx(u, v)] > 0.0f ? 1 : 0) + sat[sidx(u, v + 1)] + sat[sidx(u + 1, v)] -
                                sat[sidx(u, v)];

  const int neighbourhood = window * window - 1;
  const double hole_limit = cfg.c_h * neighbourhood;

  DepthFrame out = f;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const float d = f.depth[idx(u, v)];
      if (!(d > 0.0f)) {
        out.depth[idx(u, v)] = 0.0f;
        continue;
      }
      const int u0 = std::max(0, u - r), u1 = std::min(w - 1, u + r);
      const int v0 = std::max(0, v - r), v1 = std::min(h - 1, v + r);
      const int valid = sat[sidx(u1 + 1, v1 + 1)] - sat[sidx(u0, v1 + 1)] - sat[sidx(u1 + 1, v0)] + sat[sidx(u0, v0)];
      const int invalid_neighbours = neighbourhood - (valid - 1);
      bool discard = invalid_neighbours > hole_limit;
      if (!discard) {
        float lo = kInf, hi = -kInf;
        for (int y = v0; y <= v1; ++y) {
          lo = std::min(lo, row_min[idx(u, y)]);
          hi = std::max(hi, row_max[idx(u, y)]);
        }
        const double dd = d;
        discard = (static_cast<double>(hi) - dd > cfg.c_d) || (dd - static_cast<double>(lo) > cfg.c_d);
      }
      if (discard) out.depth[idx(u, v)] = 0.0f;
    }
  }
  return out;
}

NormalMap compute_normals(const DepthFrame& f, const Intrinsics& k) {
  NormalMap m;
  m.width = f.width;
  m.height = f.height;
  const auto n = static_cast<std::size_t>(f.width) * f.height;
  m.normals.assign(n, Eigen::Vector3f::Zero());
  m.valid.assign(n, 0);
  auto point = [&](int u, int v) { return k.back_project(u, v, f.depth_at(u, v)); };
  for (int v = 1; v + 1 < f.height; ++v) {
    for (int u = 1; u + 1 < f.width; ++u) {
      if (!(f.depth_at(u, v) > 0.0f && f.depth_at(u - 1, v) > 0.0f && f.depth_at(u + 1, v) > 0.0f &&
            f.depth_at(u, v - 1) > 0.0f && f.depth_at(u, v + 1) > 0.0f))
        continue;
      const Eigen::Vector3d dx = point(u + 1, v) - point(u - 1, v);
      const Eigen::Vector3d dy = point(u, v + 1) - point(u, v - 1);
      Eigen::Vector3d nrm = dx.cross(dy);
      const double len = nrm.norm();
      if (!(len > 0.0)) continue;
      nrm /= len;
      if (nrm.dot(point(u, v)) > 0.0) nrm = -nrm;
      const std::size_t i = static_cast<std::size_t>(v) * f.width + u;
      m.normals[i] = nrm.cast<float>();
      m.valid[i] = 1;
    }
  }
  return m;
}

}  // namespace voxstream
