#pragma once

#include "voxstream/meshing.hpp"

#include <filesystem>

namespace voxstream {

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Writes the triangle soup as PLY: float x/y/z plus uchar red/green/blue
/// per vertex, and one 3-index face per triangle (vertices are not shared).
void export_ply(const TriangleMesh& mesh, const std::filesystem::path& path,
                PlyFormat format = PlyFormat::BinaryLittleEndian);
void export_ply(const ClientMesh& mesh, const std::filesystem::path& path,
                PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Reads back a file written by export_ply, expanding faces into a soup.
TriangleMesh read_ply(const std::filesystem::path& path);

}  // namespace voxstream
