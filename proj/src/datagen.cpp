#include "voxstream/datagen.hpp"

#include "voxstream/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace voxstream {

static_assert(std::endian::native == std::endian::little, "VXDS I/O assumes a little-endian host");

Primitive Primitive::sphere(const Eigen::Vector3d& c, double r, Rgb color) {
  Primitive p;
  p.kind = Kind::Sphere;
  p.center = c;
  p.radius = r;
  p.color = color;
  return p;
}

Primitive Primitive::box(const Eigen::Vector3d& c, const Eigen::Vector3d& size, Rgb color) {
  Primitive p;
  p.kind = Kind::Box;
  p.center = c;
  p.size = size;
  p.color = color;
  return p;
}

Primitive Primitive::plane(const Eigen::Vector3d& n, double offset, Rgb color) {
  Primitive p;
  p.kind = Kind::Plane;
  p.normal = n.normalized();
  p.offset = offset;
  p.color = color;
  return p;
}

void SyntheticScene::validate() const {
  if (primitives.empty()) throw ArgumentError("scene needs at least one primitive");
  for (const Primitive& p : primitives) {
    switch (p.kind) {
      case Primitive::Kind::Sphere:
        if (!(p.radius > 0.0)) throw ArgumentError("sphere radius must be positive");
        if (!bounds.contains(p.center + Eigen::Vector3d::Constant(p.radius)) ||
            !bounds.contains(p.center - Eigen::Vector3d::Constant(p.radius)))
          throw ArgumentError("sphere leaves the scene bounds");
        break;
      case Primitive::Kind::Box:
        if ((p.size.array() <= 0.0).any()) throw ArgumentError("box extents must be positive");
        if (!bounds.contains(p.center + 0.5 * p.size) || !bounds.contains(p.center - 0.5 * p.size))
          throw ArgumentError("box leaves the scene bounds");
        break;
      case Primitive::Kind::Plane:
        if (!(p.normal.norm() > 0.0)) throw ArgumentError("plane normal must be non-zero");
        break;
    }
  }
}

namespace {

std::optional<double> intersect_one(const Primitive& p, const Eigen::AlignedBox3d& bounds,
                                    const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  constexpr double kEps = 1e-9;
  switch (p.kind) {
    case Primitive::Kind::Sphere: {
      const Eigen::Vector3d oc = o - p.center;
      const double b = oc.dot(d);
      const double c = oc.squaredNorm() - p.radius * p.radius;
      const double disc = b * b - c;
      if (disc < 0.0) return std::nullopt;
      const double s = std::sqrt(disc);
      if (-b - s > kEps) return -b - s;
      if (-b + s > kEps) return -b + s;
      return std::nullopt;
    }
    case Primitive::Kind::Box: {
      const Eigen::Vector3d lo = p.center - 0.5 * p.size;
      const Eigen::Vector3d hi = p.center + 0.5 * p.size;
      double t0 = -std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-15) {
          if (o[i] < lo[i] || o[i] > hi[i]) return std::nullopt;
          continue;
        }
        double a = (lo[i] - o[i]) / d[i];
        double b = (hi[i] - o[i]) / d[i];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
      }
      if (t0 > t1) return std::nullopt;
      if (t0 > kEps) return t0;
      if (t1 > kEps) return t1;
      return std::nullopt;
    }
    case Primitive::Kind::Plane: {
      const double denom = p.normal.dot(d);
      if (std::abs(denom) < 1e-12) return std::nullopt;
      const double t = (p.offset - p.normal.dot(o)) / denom;
      if (t <= kEps) return std::nullopt;
      const Eigen::Vector3d hit = o + t * d;
      const Eigen::Vector3d slack = Eigen::Vector3d::Constant(1e-9);
      if ((hit.array() < (bounds.min() - slack).array()).any() || (hit.array() > (bounds.max() + slack).array()).any())
        return std::nullopt;
      return t;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<RayHit> SyntheticScene::intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto t = intersect_one(primitives[i], bounds, origin, dir);
    if (t && (!best || *t < best->t)) best = RayHit{*t, i};
  }
  return best;
}

double SyntheticScene::distance(const Eigen::Vector3d& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Primitive& prim : primitives) {
    double d = 0.0;
    switch (prim.kind) {
      case Primitive::Kind::Sphere:
        d = std::abs((p - prim.center).norm() - prim.radius);
        break;
      case Primitive::Kind::Box: {
        const Eigen::Vector3d q = (p - prim.center).cwiseAbs() - 0.5 * prim.size;
        const double outside = q.cwiseMax(0.0).norm();
        const double inside = std::min(q.maxCoeff(), 0.0);
        d = std::abs(outside + inside);
        break;
      }
      case Primitive::Kind::Plane:
        d = std::abs(prim.normal.dot(p) - prim.offset);
        break;
    }
    best = std::min(best, d);
  }
  return best;
}

NoiseModel NoiseModel::none() {
  NoiseModel n;
  n.sigma_base = 0.0;
  n.sigma_quadratic = 0.0;
  return n;
}

void NoiseModel::validate() const {
  if (sigma_base < 0.0 || sigma_quadratic < 0.0) throw ArgumentError("noise sigmas must be non-negative");
  for (double r : {dropout_rate, edge_dropout, flying_pixel_rate})
    if (r < 0.0 || r > 1.0) throw ArgumentError("noise rates must lie in [0, 1]");
}

SyntheticFrame render_frame(const SyntheticScene& scene, const Eigen::Matrix4d& pose, const Intrinsics& k,
                            const NoiseModel& noise, std::uint32_t frame_index) {
  k.validate();
  noise.validate();
  const int w = k.width, h = k.height;
  const auto n = static_cast<std::size_t>(w) * h;
  SyntheticFrame out;
  out.frame = DepthFrame::blank(w, h);
  out.frame.pose = pose;
  out.true_depth.assign(n, 0.0f);

  const Eigen::Matrix3d rot = pose.topLeftCorner<3, 3>();
  const Eigen::Vector3d origin = pose.topRightCorner<3, 1>();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Eigen::Vector3d dir_cam = k.back_project(u, v, 1.0).normalized();
      const auto hit = scene.intersect(origin, rot * dir_cam);
      if (!hit) continue;
      const std::size_t i = static_cast<std::size_t>(v) * w + u;
      out.true_depth[i] = static_cast<float>(hit->t * dir_cam.z());
      out.frame.color[i] = scene.primitives[hit->primitive].color;
    }
  }

  std::seed_seq seq{static_cast<std::uint32_t>(noise.seed & 0xFFFFFFFFu), static_cast<std::uint32_t>(noise.seed >> 32),
                    frame_index};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::vector<float>& truth = out.true_depth;
  auto at = [&](int u, int v) { return truth[static_cast<std::size_t>(v) * w + u]; };

  // Pixels within 2 px of a depth jump.
  std::vector<std::uint8_t> edge(n, 0);
  if (noise.edge_dropout > 0.0 || noise.flying_pixel_rate > 0.0) {
    std::vector<std::uint8_t> jump(n, 0);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const float d = at(u, v);
        const int nu[4] = {u - 1, u + 1, u, u};
        const int nv[4] = {v, v, v - 1, v + 1};
        for (int j = 0; j < 4; ++j) {
          if (nu[j] < 0 || nv[j] < 0 || nu[j] >= w || nv[j] >= h) continue;
          const float e = at(nu[j], nv[j]);
          if ((d > 0.0f) != (e > 0.0f) || std::abs(d - e) > 0.1f) jump[static_cast<std::size_t>(v) * w + u] = 1;
        }
      }
    }
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (!jump[static_cast<std::size_t>(v) * w + u]) continue;
        for (int y = std::max(0, v - 2); y <= std::min(h - 1, v + 2); ++y)
          for (int x = std::max(0, u - 2); x <= std::min(w - 1, u + 2); ++x) edge[static_cast<std::size_t>(y) * w + x] = 1;
      }
  }

  std::vector<float>& depth = out.frame.depth;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * w + u;
      double d = truth[i];
      const double r_fly = uniform(rng);
      const double r_mix = uniform(rng);
      const double r_drop = uniform(rng);
      const double g = gauss(rng);
      if (edge[i] && r_fly < noise.flying_pixel_rate) {
        float lo = std::numeric_limits<float>::infinity(), hi = 0.0f;
        for (int y = std::max(0, v - 2); y <= std::min(h - 1, v + 2); ++y)
          for (int x = std::max(0, u - 2); x <= std::min(w - 1, u + 2); ++x) {
            const float e = at(x, y);
            if (e > 0.0f) {
              lo = std::min(lo, e);
              hi = std::max(hi, e);
            }
          }
        if (hi > 0.0f) d = lo + r_mix * (hi - lo);
      }
      if (!(d > 0.0)) continue;
      d += g * (noise.sigma_base + noise.sigma_quadratic * d * d);
      if (edge[i] && r_drop < noise.edge_dropout) d = 0.0;
      depth[i] = d > 0.0 ? static_cast<float>(d) : 0.0f;
    }
  }

  if (noise.dropout_rate > 0.0) {
    constexpr int kBlobRadius = 3;
    const double blob_area = std::numbers::pi * kBlobRadius * kBlobRadius;
    const auto blobs = static_cast<long>(std::lround(noise.dropout_rate * static_cast<double>(n) / blob_area));
    std::uniform_int_distribution<int> pu(0, w - 1), pv(0, h - 1);
    for (long b = 0; b < blobs; ++b) {
      const int cu = pu(rng), cv = pv(rng);
      for (int y = std::max(0, cv - kBlobRadius); y <= std::min(h - 1, cv + kBlobRadius); ++y)
        for (int x = std::max(0, cu - kBlobRadius); x <= std::min(w - 1, cu + kBlobRadius); ++x)
          if ((x - cu) * (x - cu) + (y - cv) * (y - cv) <= kBlobRadius * kBlobRadius)
            depth[static_cast<std::size_t>(y) * w + x] = 0.0f;
    }
  }
  return out;
}

Eigen::Matrix4d look_at_pose(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Eigen::Vector3d::UnitX());
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose.block<3, 1>(0, 0) = x;
  pose.block<3, 1>(0, 1) = y;
  pose.block<3, 1>(0, 2) = z;
  pose.block<3, 1>(0, 3) = eye;
  return pose;
}

std::vector<Eigen::Matrix4d> orbit_trajectory(const Eigen::Vector3d& center, double radius, int n_frames,
                                              const Eigen::Vector3d& target) {
  if (n_frames < 1) throw ArgumentError("orbit needs at least one frame");
  std::vector<Eigen::Matrix4d> poses;
  poses.reserve(static_cast<std::size_t>(n_frames));
  for (int i = 0; i < n_frames; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n_frames;
    const Eigen::Vector3d eye = center + radius * Eigen::Vector3d(std::cos(a), std::sin(a), 0.0);
    poses.push_back(look_at_pose(eye, target));
  }
  return poses;
}

namespace {

constexpr char kMagic[4] = {'V', 'X', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool read_pod(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Intrinsics& k, const std::vector<DepthFrame>& frames) {
  k.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint32_t>(k.width));
  write_pod(os, static_cast<std::uint32_t>(k.height));
  for (double v : {k.fx, k.fy, k.cx, k.cy}) write_pod(os, static_cast<float>(v));
  write_pod(os, static_cast<std::uint32_t>(frames.size()));
  const auto n = static_cast<std::size_t>(k.width) * k.height;
  std::vector<std::uint16_t> mm(n);
  for (const DepthFrame& f : frames) {
    if (f.width != k.width || f.height != k.height) throw ArgumentError("frame size differs from dataset size");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) write_pod(os, static_cast<float>(f.pose(r, c)));
    for (std::size_t i = 0; i < n; ++i) {
      const double d = f.depth[i];
      mm[i] = d > 0.0 ? static_cast<std::uint16_t>(std::clamp(std::lround(d * 1000.0), 0L, 65535L)) : 0;
    }
    os.write(reinterpret_cast<const char*>(mm.data()), static_cast<std::streamsize>(n * sizeof(std::uint16_t)));
    os.write(reinterpret_cast<const char*>(f.color.data()), static_cast<std::streamsize>(n * 3));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw FormatError("cannot open dataset " + path.string());
  char magic[4];
  std::uint32_t version = 0, w = 0, h = 0;
  float intr[4];
  if (!in_.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) throw FormatError("bad VXDS magic");
  if (!read_pod(in_, version) || version != kVersion) throw FormatError("unsupported VXDS version");
  if (!read_pod(in_, w) || !read_pod(in_, h) || !in_.read(reinterpret_cast<char*>(intr), sizeof(intr)) ||
      !read_pod(in_, count_))
    throw FormatError("truncated VXDS header");
  k_.width = static_cast<int>(w);
  k_.height = static_cast<int>(h);
  k_.fx = intr[0];
  k_.fy = intr[1];
  k_.cx = intr[2];
  k_.cy = intr[3];
  try {
    k_.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid VXDS intrinsics: ") + e.what());
  }
}

std::optional<DepthFrame> DatasetReader::next() {
  if (read_ >= count_) return std::nullopt;
  const long index = static_cast<long>(read_);
  DepthFrame f = DepthFrame::blank(k_.width, k_.height);
  float pose[16];
  if (!in_.read(reinterpret_cast<char*>(pose), sizeof(pose))) throw FormatError("truncated VXDS pose", index);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) f.pose(r, c) = pose[4 * r + c];
  const auto n = static_cast<std::size_t>(k_.width) * k_.height;
  std::vector<std::uint16_t> mm(n);
  if (!in_.read(reinterpret_cast<char*>(mm.data()), static_cast<std::streamsize>(n * sizeof(std::uint16_t))))
    throw FormatError("truncated VXDS depth", index);
  if (!in_.read(reinterpret_cast<char*>(f.color.data()), static_cast<std::streamsize>(n * 3)))
    throw FormatError("truncated VXDS color", index);
  for (std::size_t i = 0; i < n; ++i) f.depth[i] = static_cast<float>(mm[i] * 0.001);
  f.timestamp = index / 30.0;
  ++read_;
  return f;
}

Dataset load_dataset(const std::filesystem::path& path) {
  DatasetReader reader(path);
  Dataset ds;
  ds.intrinsics = reader.intrinsics();
  ds.frames.reserve(reader.frame_count());
  while (auto f = reader.next()) ds.frames.push_back(std::move(*f));
  return ds;
}

std::vector<SyntheticFrame> SceneSpec::render() const {
  scene.validate();
  std::vector<SyntheticFrame> out;
  const auto poses = orbit_trajectory(orbit.center, orbit.radius, frames, orbit.target);
  out.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    out.push_back(render_frame(scene, poses[i], intrinsics, noise, static_cast<std::uint32_t>(i)));
    out.back().frame.timestamp = static_cast<double>(i) / 30.0;
  }
  return out;
}

namespace {

using nlohmann::json;

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ArgumentError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Rgb rgb(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ArgumentError("expected an RGB triple");
  return {j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& json_text) {
  SceneSpec spec;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("scene spec is not valid JSON: ") + e.what());
  }
  try {
    if (j.contains("bounds")) spec.scene.bounds = Eigen::AlignedBox3d(vec3(j["bounds"]["min"]), vec3(j["bounds"]["max"]));
    for (const json& p : j.at("primitives")) {
      const std::string type = p.at("type");
      const Rgb color = p.contains("color") ? rgb(p["color"]) : Rgb{200, 200, 200};
      if (type == "sphere") spec.scene.primitives.push_back(Primitive::sphere(vec3(p.at("center")), p.at("radius"), color));
      else if (type == "box") spec.scene.primitives.push_back(Primitive::box(vec3(p.at("center")), vec3(p.at("size")), color));
      else if (type == "plane") spec.scene.primitives.push_back(Primitive::plane(vec3(p.at("normal")), p.at("offset"), color));
      else throw ArgumentError("unknown primitive type '" + type + "'");
    }
    if (j.contains("camera")) {
      const json& c = j["camera"];
      Intrinsics& k = spec.intrinsics;
      k.width = c.value("width", 640);
      k.height = c.value("height", 480);
      k.fx = c.value("fx", 0.8203125 * k.width);
      k.fy = c.value("fy", k.fx);
      k.cx = c.value("cx", 0.5 * (k.width - 1));
      k.cy = c.value("cy", 0.5 * (k.height - 1));
    }
    if (j.contains("noise")) {
      const json& n = j["noise"];
      NoiseModel& nm = spec.noise;
      nm = NoiseModel();
      nm.sigma_base = n.value("sigma_base", nm.sigma_base);
      nm.sigma_quadratic = n.value("sigma_quadratic", nm.sigma_quadratic);
      nm.dropout_rate = n.value("dropout_rate", nm.dropout_rate);
      nm.edge_dropout = n.value("edge_dropout", nm.edge_dropout);
      nm.flying_pixel_rate = n.value("flying_pixel_rate", nm.flying_pixel_rate);
      nm.seed = n.value("seed", nm.seed);
    }
    if (j.contains("orbit")) {
      const json& o = j["orbit"];
      if (o.contains("center")) spec.orbit.center = vec3(o["center"]);
      spec.orbit.radius = o.value("radius", spec.orbit.radius);
      spec.orbit.target = o.contains("target") ? vec3(o["target"]) : spec.orbit.center;
    }
    spec.frames = j.value("frames", spec.frames);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("invalid scene spec: ") + e.what());
  }
  spec.scene.validate();
  spec.intrinsics.validate();
  spec.noise.validate();
  if (spec.frames < 1) throw ArgumentError("scene spec needs at least one frame");
  return spec;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scene spec " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scene_spec(ss.str());
}

}  // namespace voxstream
