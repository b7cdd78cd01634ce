#pragma once

#include "voxstream/datagen.hpp"

namespace voxstream::testing {

/// Small sphere-on-plane orbit that reconstructs in well under a second.
inline SceneSpec small_scene(int frames = 8, int width = 80, int height = 60, bool noisy = false) {
  SceneSpec s;
  s.scene.bounds = Eigen::AlignedBox3d(Eigen::Vector3d(-0.6, -0.6, -0.01), Eigen::Vector3d(0.6, 0.6, 0.8));
  s.scene.primitives = {Primitive::plane({0, 0, 1}, 0.0, {120, 110, 100}),
                        Primitive::sphere({0, 0, 0.2}, 0.15, {60, 120, 200}),
                        Primitive::box({0.25, 0.2, 0.08}, {0.12, 0.12, 0.16}, {150, 90, 60})};
  s.intrinsics.width = width;
  s.intrinsics.height = height;
  s.intrinsics.fx = s.intrinsics.fy = 0.8203125 * width;
  s.intrinsics.cx = (width - 1) / 2.0;
  s.intrinsics.cy = (height - 1) / 2.0;
  if (noisy) {
    s.noise.sigma_base = 0.001;
    s.noise.sigma_quadratic = 0.003;
    s.noise.dropout_rate = 0.02;
    s.noise.edge_dropout = 0.3;
    s.noise.flying_pixel_rate = 0.3;
    s.noise.seed = 3;
  }
  s.orbit.center = {0, 0, 0.6};
  s.orbit.radius = 0.6;
  s.orbit.target = {0, 0, 0.15};
  s.frames = frames;
  return s;
}

inline GridConfig small_grid() {
  GridConfig g;
  g.tsdf_bucket_count = 1 << 14;
  g.mc_bucket_count = 1 << 14;
  return g;
}

}  // namespace voxstream::testing
