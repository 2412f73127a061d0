#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ctaflow/vec3.hpp"

namespace ctaflow {

using Face = std::array<std::uint32_t, 3>;

/// Triangle mesh in normalized coordinates. Deformations only ever replace
/// `vertices`; `faces` is shared connectivity.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  /// Vertex i corresponds to vertex i of a partner mesh (same connectivity).
  bool correspondence = false;

  std::size_t vertex_count() const noexcept { return vertices.size(); }
  std::size_t face_count() const noexcept { return faces.size(); }

  /// Throws TopologyError if a face index is out of range or a face repeats a vertex.
  void validate() const;

  /// Same connectivity, new positions.
  TriangleMesh with_vertices(std::vector<Vec3> positions) const;
};

/// Points on a surface with the face and barycentric coordinates they were drawn from.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<std::uint32_t> source_faces;
  std::vector<std::array<double, 3>> barycentric;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  /// Wraps raw points without provenance.
  static PointCloud from_points(std::vector<Vec3> points);
};

/// 1-ring neighbourhoods in compressed form; neighbours of vertex i are
/// `neighbors[offsets[i] .. offsets[i+1])`, sorted ascending.
struct VertexAdjacency {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> neighbors;

  std::span<const std::uint32_t> ring(std::size_t v) const {
    return {neighbors.data() + offsets[v], neighbors.data() + offsets[v + 1]};
  }
};

struct FaceNormals {
  std::vector<Vec3> normals;          // zero for degenerate faces
  std::vector<std::uint8_t> degenerate;  // 1 where the face has (near) zero area

  std::size_t degenerate_count() const;
};

/// Undirected edge (lo < hi) with its incident faces; `faces[1] == kNoFace`
/// for boundary edges.
struct EdgeFaces {
  static constexpr std::uint32_t kNoFace = 0xffffffffu;
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  std::array<std::uint32_t, 2> faces{kNoFace, kNoFace};
  std::uint32_t incident = 0;
};

inline constexpr int kMaxIcosphereSubdivisions = 7;

/// Subdivided icosahedron projected onto a sphere; V = 10*4^s + 2, F = 20*4^s.
TriangleMesh make_icosphere(int subdivisions, double radius);

VertexAdjacency build_adjacency(const TriangleMesh& mesh);

/// Umbrella-weight smoothing: each iteration moves every vertex `factor` of
/// the way toward the mean of its 1-ring.
TriangleMesh laplacian_smooth(const TriangleMesh& mesh, int iterations, double factor);

FaceNormals face_normals(const TriangleMesh& mesh);

/// True when the triangle (a, b, c) has no usable normal.
bool is_degenerate_triangle(const Vec3& a, const Vec3& b, const Vec3& c);

/// Sorted unique undirected edges.
std::vector<std::pair<std::uint32_t, std::uint32_t>> unique_edges(const TriangleMesh& mesh);

/// Sorted unique edges with incident-face bookkeeping.
std::vector<EdgeFaces> edge_faces(const TriangleMesh& mesh);

/// V - E + F.
long euler_characteristic(const TriangleMesh& mesh);

double face_area(const TriangleMesh& mesh, std::size_t face);
double surface_area(const TriangleMesh& mesh);

/// Area-weighted face choice followed by uniform barycentric sampling.
/// Deterministic for a fixed seed.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

/// Re-evaluates the surface points of `cloud` on a mesh with the same
/// connectivity but moved vertices.
std::vector<Vec3> resample_points(const TriangleMesh& mesh, const PointCloud& cloud);

/// FNV-1a over the face index buffer and vertex count.
std::uint64_t connectivity_hash(const TriangleMesh& mesh);

}  // namespace ctaflow
