#pragma once

#include "voxstream/preprocess.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace voxstream {

struct Primitive {
  enum class Kind { Sphere, Box, Plane };

  Kind kind = Kind::Sphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // sphere / box
  double radius = 1.0;                                // sphere
  Eigen::Vector3d size = Eigen::Vector3d::Ones();     // box edge lengths (axis-aligned)
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // plane: {p : n.p = offset}
  double offset = 0.0;
  Rgb color{200, 200, 200};

  static Primitive sphere(const Eigen::Vector3d& c, double r, Rgb color = {200, 200, 200});
  static Primitive box(const Eigen::Vector3d& c, const Eigen::Vector3d& size, Rgb color = {200, 200, 200});
  static Primitive plane(const Eigen::Vector3d& n, double offset, Rgb color = {200, 200, 200});
};

struct RayHit {
  double t = 0.0;
  std::size_t primitive = 0;
};

/// Analytic scene. Planes are clipped to the bounding box.
struct SyntheticScene {
  std::vector<Primitive> primitives;
  Eigen::AlignedBox3d bounds{Eigen::Vector3d::Constant(-10.0), Eigen::Vector3d::Constant(10.0)};

  void validate() const;
  std::optional<RayHit> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const;
  /// Unsigned distance to the nearest primitive surface.
  double distance(const Eigen::Vector3d& p) const;
};

/// sigma(d) = sigma_base + sigma_quadratic * d^2, plus invalidation and
/// mixed-depth effects near depth discontinuities.
struct NoiseModel {
  double sigma_base = 0.001;
  double sigma_quadratic = 0.002;
  double dropout_rate = 0.0;       // fraction of pixels invalidated in random blobs
  double edge_dropout = 0.0;       // invalidation probability within 2 px of a discontinuity
  double flying_pixel_rate = 0.0;  // probability of a mixed foreground/background depth near a discontinuity
  std::uint64_t seed = 0;

  static NoiseModel none();
  void validate() const;
};

struct SyntheticFrame {
  DepthFrame frame;
  std::vector<float> true_depth;  // noise-free depth, 0 where nothing is hit
};

SyntheticFrame render_frame(const SyntheticScene& scene, const Eigen::Matrix4d& pose, const Intrinsics& k,
                            const NoiseModel& noise, std::uint32_t frame_index);

/// Camera-to-world pose at `eye` looking at `target` (camera x right, y down, z forward).
Eigen::Matrix4d look_at_pose(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                             const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ());

/// n poses evenly spaced on the horizontal circle of the given radius around
/// `center`, each looking at `target`.
std::vector<Eigen::Matrix4d> orbit_trajectory(const Eigen::Vector3d& center, double radius, int n_frames,
                                              const Eigen::Vector3d& target);

struct Dataset {
  Intrinsics intrinsics;
  std::vector<DepthFrame> frames;
};

/// VXDS layout (little-endian): "VXDS", version u32, width u32, height u32,
/// fx fy cx cy f32, frame_count u32; then per frame a row-major 4x4 f32
/// camera-to-world pose, width*height u16 depth in millimeters (0 invalid)
/// and width*height RGB8.
void save_dataset(const std::filesystem::path& path, const Intrinsics& k, const std::vector<DepthFrame>& frames);
Dataset load_dataset(const std::filesystem::path& path);

/// Streams frames from a VXDS file one at a time.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);
  const Intrinsics& intrinsics() const { return k_; }
  std::uint32_t frame_count() const { return count_; }
  /// Next frame, or nullopt after the last one. Throws FormatError on truncation.
  std::optional<DepthFrame> next();

 private:
  std::ifstream in_;
  Intrinsics k_;
  std::uint32_t count_ = 0;
  std::uint32_t read_ = 0;
};

struct OrbitSpec {
  Eigen::Vector3d center = Eigen::Vector3d(0.0, 0.0, 1.0);
  double radius = 2.0;
  Eigen::Vector3d target = Eigen::Vector3d(0.0, 0.0, 1.0);
};

/// A scene description file: primitives, camera, noise and trajectory.
struct SceneSpec {
  SyntheticScene scene;
  Intrinsics intrinsics;
  NoiseModel noise = NoiseModel::none();
  OrbitSpec orbit;
  int frames = 60;

  std::vector<SyntheticFrame> render() const;
};

SceneSpec parse_scene_spec(const std::string& json_text);
SceneSpec load_scene_spec(const std::filesystem::path& path);

}  // namespace voxstream
