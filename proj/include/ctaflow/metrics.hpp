#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "ctaflow/mesh.hpp"

namespace ctaflow {

/// Nearest-sample distances between two surfaces, one entry per sample.
struct SurfaceDistances {
  std::vector<double> a_to_b;
  std::vector<double> b_to_a;
};

/// Samples `n` points on each mesh (A with seed_a, B with seed_b) and measures
/// each sample's distance to the nearest sample of the other surface.
SurfaceDistances surface_distances(const TriangleMesh& a, const TriangleMesh& b, std::size_t n,
                                   std::uint64_t seed_a, std::uint64_t seed_b, int workers = 1);

/// Average symmetric surface distance: the mean of the two directed mean distances.
double assd(const SurfaceDistances& d);
double assd(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed);
double assd(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed_a, std::uint64_t seed_b);

/// 90th percentile (linear interpolation between order statistics) of the
/// pooled bidirectional distances.
double hd90(const SurfaceDistances& d);
double hd90(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed);

/// Type-7 quantile of `values` for q in [0, 1]; `values` need not be sorted.
double quantile_linear(std::vector<double> values, double q);

inline constexpr double kIntersectionTolerance = 1e-9;

/// Proper intersection of two triangles: the triangles share interior points
/// beyond the tolerance. Contacts along a vertex, an edge, or within `eps` of
/// a plane are not counted.
bool triangles_intersect(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2,
                         double eps = kIntersectionTolerance);

enum class SifBackend { kBrute, kBvh };
std::string_view to_string(SifBackend backend);
SifBackend parse_sif_backend(std::string_view name);

struct SifResult {
  double percent = 0.0;                     ///< 100 * |faces| / face count
  std::vector<std::uint32_t> faces;         ///< self-intersecting faces, sorted
  std::vector<std::uint32_t> degenerate;    ///< excluded degenerate faces, sorted
};

/// Faces that properly intersect another face sharing no vertex with them.
/// Both backends return the same face set.
SifResult sif_ratio(const TriangleMesh& mesh, SifBackend backend = SifBackend::kBvh, int workers = 1);

struct MetricsReport {
  double assd = 0.0;
  double hd90 = 0.0;
  double sif_percent = 0.0;
  long euler_characteristic = 0;
  double wall_time = 0.0;  ///< seconds
  std::vector<std::uint32_t> sif_faces;
};

struct MetricsOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  SifBackend backend = SifBackend::kBvh;
  int workers = 1;
};

/// Geometric accuracy of `pred` against `target` plus the mesh quality of `pred`.
MetricsReport evaluate(const TriangleMesh& pred, const TriangleMesh& target, const MetricsOptions& options);

}  // namespace ctaflow
