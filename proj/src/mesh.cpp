#include "ctaflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <tuple>

#include "ctaflow/errors.hpp"
#include "ctaflow/random.hpp"

namespace ctaflow {

void TriangleMesh::validate() const {
  const auto n = static_cast<std::uint32_t>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (std::uint32_t idx : face) {
      if (idx >= n) {
        throw TopologyError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                            " of " + std::to_string(n));
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw TopologyError("face " + std::to_string(f) + " repeats a vertex");
    }
  }
}

TriangleMesh TriangleMesh::with_vertices(std::vector<Vec3> positions) const {
  TriangleMesh out;
  out.vertices = std::move(positions);
  out.faces = faces;
  out.correspondence = correspondence;
  return out;
}

PointCloud PointCloud::from_points(std::vector<Vec3> points) {
  PointCloud cloud;
  cloud.points = std::move(points);
  return cloud;
}

std::size_t FaceNormals::degenerate_count() const {
  return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), std::uint8_t{1}));
}

TriangleMesh make_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > kMaxIcosphereSubdivisions) {
    throw SizeError("icosphere subdivisions must be in [0, " + std::to_string(kMaxIcosphereSubdivisions) +
                    "], got " + std::to_string(subdivisions));
  }
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw InputError("icosphere radius must be positive and finite");
  }

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (Vec3& v : mesh.vertices) v = v / norm(v);

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoints.try_emplace({key.first, key.second}, 0u);
      if (inserted) {
        const Vec3 m = (mesh.vertices[a] + mesh.vertices[b]) * 0.5;
        it->second = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(m / norm(m));
      }
      return it->second;
    };
    std::vector<Face> refined;
    refined.reserve(mesh.faces.size() * 4);
    for (const Face& f : mesh.faces) {
      const std::uint32_t ab = midpoint(f[0], f[1]);
      const std::uint32_t bc = midpoint(f[1], f[2]);
      const std::uint32_t ca = midpoint(f[2], f[0]);
      refined.push_back({f[0], ab, ca});
      refined.push_back({f[1], bc, ab});
      refined.push_back({f[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(refined);
  }

  for (Vec3& v : mesh.vertices) v = v * radius;
  return mesh;
}

VertexAdjacency build_adjacency(const TriangleMesh& mesh) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> directed;
  directed.reserve(mesh.faces.size() * 6);
  for (const Face& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = f[e];
      const std::uint32_t b = f[(e + 1) % 3];
      directed.emplace_back(a, b);
      directed.emplace_back(b, a);
    }
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  VertexAdjacency adj;
  adj.offsets.assign(mesh.vertices.size() + 1, 0);
  adj.neighbors.reserve(directed.size());
  for (const auto& [a, b] : directed) {
    ++adj.offsets[a + 1];
    adj.neighbors.push_back(b);
  }
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) adj.offsets[i + 1] += adj.offsets[i];
  return adj;
}

TriangleMesh laplacian_smooth(const TriangleMesh& mesh, int iterations, double factor) {
  if (iterations < 0) throw InputError("smoothing iterations must be non-negative");
  if (!(factor > 0.0 && factor <= 1.0)) throw InputError("smoothing factor must be in (0, 1]");
  if (iterations == 0) return mesh;

  const VertexAdjacency adj = build_adjacency(mesh);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (adj.ring(v).empty()) throw TopologyError("vertex " + std::to_string(v) + " has an empty 1-ring");
  }

  std::vector<Vec3> current = mesh.vertices;
  std::vector<Vec3> next(current.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t v = 0; v < current.size(); ++v) {
      const auto ring = adj.ring(v);
      Vec3 mean;
      for (std::uint32_t n : ring) mean += current[n];
      mean = mean / static_cast<double>(ring.size());
      next[v] = current[v] + (mean - current[v]) * factor;
    }
    std::swap(current, next);
  }
  return mesh.with_vertices(std::move(current));
}

bool is_degenerate_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const double l1 = norm(e1);
  const double l2 = norm(e2);
  if (l1 == 0.0 || l2 == 0.0) return true;
  return norm(cross(e1, e2)) <= 1e-12 * l1 * l2;
}

FaceNormals face_normals(const TriangleMesh& mesh) {
  FaceNormals out;
  out.normals.resize(mesh.faces.size());
  out.degenerate.assign(mesh.faces.size(), 0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3& a = mesh.vertices[mesh.faces[f][0]];
    const Vec3& b = mesh.vertices[mesh.faces[f][1]];
    const Vec3& c = mesh.vertices[mesh.faces[f][2]];
    if (is_degenerate_triangle(a, b, c)) {
      out.degenerate[f] = 1;
      continue;
    }
    const Vec3 n = cross(b - a, c - a);
    out.normals[f] = n / norm(n);
  }
  return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> unique_edges(const TriangleMesh& mesh) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const Face& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      edges.push_back(std::minmax(f[e], f[(e + 1) % 3]));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<EdgeFaces> edge_faces(const TriangleMesh& mesh) {
  struct Entry {
    std::uint32_t lo, hi, face;
    bool operator<(const Entry& o) const { return std::tie(lo, hi, face) < std::tie(o.lo, o.hi, o.face); }
  };
  std::vector<Entry> entries;
  entries.reserve(mesh.faces.size() * 3);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    for (int e = 0; e < 3; ++e) {
      const auto [lo, hi] = std::minmax(face[e], face[(e + 1) % 3]);
      entries.push_back({lo, hi, static_cast<std::uint32_t>(f)});
    }
  }
  std::sort(entries.begin(), entries.end());

  std::vector<EdgeFaces> out;
  for (const Entry& e : entries) {
    if (out.empty() || out.back().lo != e.lo || out.back().hi != e.hi) {
      EdgeFaces ef;
      ef.lo = e.lo;
      ef.hi = e.hi;
      out.push_back(ef);
    }
    EdgeFaces& cur = out.back();
    if (cur.incident < 2) cur.faces[cur.incident] = e.face;
    ++cur.incident;
  }
  return out;
}

long euler_characteristic(const TriangleMesh& mesh) {
  return static_cast<long>(mesh.vertices.size()) - static_cast<long>(unique_edges(mesh).size()) +
         static_cast<long>(mesh.faces.size());
}

double face_area(const TriangleMesh& mesh, std::size_t face) {
  const Face& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  return 0.5 * norm(cross(mesh.vertices[f[1]] - a, mesh.vertices[f[2]] - a));
}

double surface_area(const TriangleMesh& mesh) {
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) total += face_area(mesh, f);
  return total;
}

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("sample count must be positive");

  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    const bool degenerate =
        is_degenerate_triangle(mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]);
    total += degenerate ? 0.0 : face_area(mesh, f);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw SamplingError("cannot sample a mesh without non-degenerate faces");

  std::mt19937_64 rng(seed);
  PointCloud cloud;
  cloud.points.resize(n);
  cloud.source_faces.resize(n);
  cloud.barycentric.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = uniform01(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto f = static_cast<std::uint32_t>(it - cumulative.begin());

    const double s = std::sqrt(uniform01(rng));
    const double r2 = uniform01(rng);
    const std::array<double, 3> w{1.0 - s, s * (1.0 - r2), s * r2};
    const Face& face = mesh.faces[f];
    cloud.points[i] = mesh.vertices[face[0]] * w[0] + mesh.vertices[face[1]] * w[1] + mesh.vertices[face[2]] * w[2];
    cloud.source_faces[i] = f;
    cloud.barycentric[i] = w;
  }
  return cloud;
}

std::vector<Vec3> resample_points(const TriangleMesh& mesh, const PointCloud& cloud) {
  if (cloud.source_faces.size() != cloud.points.size() || cloud.barycentric.size() != cloud.points.size()) {
    throw StateError("point cloud carries no surface provenance");
  }
  std::vector<Vec3> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Face& face = mesh.faces.at(cloud.source_faces[i]);
    const auto& w = cloud.barycentric[i];
    out[i] = mesh.vertices[face[0]] * w[0] + mesh.vertices[face[1]] * w[1] + mesh.vertices[face[2]] * w[2];
  }
  return out;
}

std::uint64_t connectivity_hash(const TriangleMesh& mesh) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t value) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (value >> (8 * byte)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  mix(mesh.vertices.size());
  for (const Face& f : mesh.faces) {
    for (std::uint32_t idx : f) mix(idx);
  }
  return h;
}

}  // namespace ctaflow
