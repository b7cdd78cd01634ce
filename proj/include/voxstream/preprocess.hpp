#pragma once

#include "voxstream/voxel.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <vector>

namespace voxstream {

/// Pinhole camera model. Pixel (u, v) refers to the integer sample grid.
struct Intrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  void validate() const;

  Eigen::Vector3d back_project(double u, double v, double depth) const {
    return {(u - cx) / fx * depth, (v - cy) / fy * depth, depth};
  }

  /// Nearest pixel of a camera-space point, or nullopt if behind the camera
  /// or outside the image.
  std::optional<Eigen::Vector2i> project(const Eigen::Vector3d& p) const;

  /// Same intrinsics at 1/factor of the resolution.
  Intrinsics scaled(double factor) const;
};

/// Depth in meters (0 = invalid) with RGB8 color and a camera-to-world pose.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<float> depth;
  std::vector<Rgb> color;
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  double timestamp = 0.0;

  static DepthFrame blank(int width, int height);

  float depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  float& depth_at(int u, int v) { return depth[static_cast<std::size_t>(v) * width + u]; }
  const Rgb& color_at(int u, int v) const { return color[static_cast<std::size_t>(v) * width + u]; }

  Eigen::Matrix3d rotation() const { return pose.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return pose.topRightCorner<3, 1>(); }

  /// Throws ArgumentError on inconsistent buffer sizes or a non-rigid pose.
  void validate() const;
};

int valid_pixel_count(const DepthFrame& f);

struct DepthFilterConfig {
  double c_d = 0.2;
  double c_h = 0.25;
  int radius = 3;

  void validate() const;
};

/// Discards samples on stark depth discontinuities or with too many invalid
/// neighbours. A pixel is dropped if a valid neighbour in the
/// (2r+1)x(2r+1) window differs by more than c_d, or if the number of invalid
/// neighbours (out-of-image counts as invalid) exceeds c_h times the
/// neighbourhood size (center excluded). Evaluated against the input only.
DepthFrame filter_depth(const DepthFrame& f, const DepthFilterConfig& cfg);

struct NormalMap {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3f> normals;
  std::vector<std::uint8_t> valid;

  bool is_valid(int u, int v) const { return valid[static_cast<std::size_t>(v) * width + u] != 0; }
  const Eigen::Vector3f& at(int u, int v) const { return normals[static_cast<std::size_t>(v) * width + u]; }
};

/// Camera-frame unit normals from central differences, oriented toward the camera.
NormalMap compute_normals(const DepthFrame& f, const Intrinsics& k);

}  // namespace voxstream
