#include "voxstream/ply.hpp"

#include "voxstream/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace voxstream {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

namespace {

void write_header(std::ostream& os, PlyFormat format, std::size_t vertices, std::size_t faces) {
  os << "ply\n"
     << "format " << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
     << "comment voxstream triangle soup\n"
     << "element vertex " << vertices << "\n"
     << "property float x\nproperty float y\nproperty float z\n"
     << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
     << "element face " << faces << "\n"
     << "property list uchar int vertex_indices\n"
     << "end_header\n";
}

}  // namespace

void export_ply(const TriangleMesh& mesh, const std::filesystem::path& path, PlyFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::size_t faces = mesh.triangle_count();
  write_header(os, format, mesh.vertices.size(), faces);
  if (format == PlyFormat::Ascii) {
    os.precision(9);
    for (const MeshVertex& v : mesh.vertices)
      os << v.position.x() << ' ' << v.position.y() << ' ' << v.position.z() << ' ' << int(v.color[0]) << ' '
         << int(v.color[1]) << ' ' << int(v.color[2]) << '\n';
    for (std::size_t f = 0; f < faces; ++f) os << "3 " << 3 * f << ' ' << 3 * f + 1 << ' ' << 3 * f + 2 << '\n';
  } else {
    for (const MeshVertex& v : mesh.vertices) {
      os.write(reinterpret_cast<const char*>(v.position.data()), 3 * sizeof(float));
      os.write(reinterpret_cast<const char*>(v.color.data()), 3);
    }
    for (std::size_t f = 0; f < faces; ++f) {
      const std::uint8_t n = 3;
      os.write(reinterpret_cast<const char*>(&n), 1);
      for (int i = 0; i < 3; ++i) {
        const auto idx = static_cast<std::int32_t>(3 * f + static_cast<std::size_t>(i));
        os.write(reinterpret_cast<const char*>(&idx), sizeof(idx));
      }
    }
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void export_ply(const ClientMesh& mesh, const std::filesystem::path& path, PlyFormat format) {
  export_ply(extract_triangles(mesh), path, format);
}

TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "ply") throw FormatError("not a PLY file: " + path.string());
  bool ascii = false;
  std::size_t n_vertices = 0, n_faces = 0;
  while (std::getline(is, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") ascii = true;
      else if (fmt != "binary_little_endian") throw FormatError("unsupported PLY format " + fmt);
    } else if (key == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") n_vertices = count;
      else if (name == "face") n_faces = count;
    }
  }
  if (line != "end_header") throw FormatError("PLY header not terminated");

  std::vector<MeshVertex> vertices(n_vertices);
  for (MeshVertex& v : vertices) {
    if (ascii) {
      int r, g, b;
      is >> v.position.x() >> v.position.y() >> v.position.z() >> r >> g >> b;
      v.color = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    } else {
      is.read(reinterpret_cast<char*>(v.position.data()), 3 * sizeof(float));
      is.read(reinterpret_cast<char*>(v.color.data()), 3);
    }
    if (!is) throw FormatError("truncated PLY vertex data");
  }
  TriangleMesh mesh;
  mesh.vertices.reserve(3 * n_faces);
  for (std::size_t f = 0; f < n_faces; ++f) {
    int count = 0;
    std::int32_t idx[3] = {0, 0, 0};
    if (ascii) {
      is >> count >> idx[0] >> idx[1] >> idx[2];
    } else {
      std::uint8_t c = 0;
      is.read(reinterpret_cast<char*>(&c), 1);
      count = c;
      if (count == 3) is.read(reinterpret_cast<char*>(idx), sizeof(idx));
    }
    if (!is || count != 3) throw FormatError("malformed PLY face");
    for (std::int32_t i : idx) {
      if (i < 0 || static_cast<std::size_t>(i) >= vertices.size()) throw FormatError("PLY face index out of range");
      mesh.vertices.push_back(vertices[static_cast<std::size_t>(i)]);
    }
  }
  return mesh;
}

}  // namespace voxstream
