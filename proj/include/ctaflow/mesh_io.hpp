#pragma once

#include <filesystem>

#include "ctaflow/mesh.hpp"

namespace ctaflow {

// Vertex order is preserved exactly on read and write, and coordinates are
// written with round-trip precision, so correspondence survives a save/load.

TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

/// ASCII PLY only.
TriangleMesh read_ply(const std::filesystem::path& path);
void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Dispatches on the extension (.obj or .ply).
TriangleMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace ctaflow
