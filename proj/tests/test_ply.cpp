#include "voxstream/errors.hpp"
#include "voxstream/ply.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace voxstream;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("voxstream_test_" + name);
}

TriangleMesh random_mesh(std::size_t triangles) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> pos(-3.0f, 3.0f);
  std::uniform_int_distribution<int> col(0, 255);
  TriangleMesh m;
  for (std::size_t i = 0; i < 3 * triangles; ++i)
    m.vertices.push_back({Eigen::Vector3f(pos(rng), pos(rng), pos(rng)),
                          Rgb{static_cast<std::uint8_t>(col(rng)), static_cast<std::uint8_t>(col(rng)),
                              static_cast<std::uint8_t>(col(rng))}});
  return m;
}

}  // namespace

TEST_CASE("binary PLY round trip is exact") {
  const TriangleMesh m = random_mesh(200);
  const auto path = temp_path("bin.ply");
  export_ply(m, path, PlyFormat::BinaryLittleEndian);
  CHECK(read_ply(path).vertices == m.vertices);
  std::filesystem::remove(path);
}

TEST_CASE("ASCII PLY round trip") {
  const TriangleMesh m = random_mesh(50);
  const auto path = temp_path("ascii.ply");
  export_ply(m, path, PlyFormat::Ascii);
  const TriangleMesh back = read_ply(path);
  REQUIRE(back.vertices.size() == m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    CHECK((back.vertices[i].position - m.vertices[i].position).norm() < 1e-5f);
    CHECK(back.vertices[i].color == m.vertices[i].color);
  }
  std::filesystem::remove(path);
}

TEST_CASE("empty mesh exports a valid file") {
  const auto path = temp_path("empty.ply");
  export_ply(TriangleMesh{}, path, PlyFormat::Ascii);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("element vertex 0") != std::string::npos);
  CHECK(text.find("element face 0") != std::string::npos);
  CHECK(read_ply(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("client mesh export matches its triangles") {
  GridConfig g;
  g.mc_bucket_count = 1 << 10;
  ClientMesh mesh(g);
  McBlock b;
  b.voxels[0] = McVoxel{15, {10, 20, 30}};
  integrate_block(mesh, {1, -2, 0}, b);
  const auto path = temp_path("client.ply");
  export_ply(mesh, path);
  const TriangleMesh back = read_ply(path);
  CHECK(back.triangle_count() == 2);
  CHECK(back.vertices == extract_triangles(mesh).vertices);
  std::filesystem::remove(path);
}

TEST_CASE("unreadable or malformed files are rejected") {
  CHECK_THROWS(read_ply(temp_path("does_not_exist.ply")));
  const auto path = temp_path("bad.ply");
  std::ofstream(path) << "not a ply file\n";
  CHECK_THROWS(read_ply(path));
  std::filesystem::remove(path);
}
