#pragma once

#include <span>
#include <vector>

#include "ctaflow/mesh.hpp"

namespace ctaflow {

struct LossWeights {
  double lambda_lap = 0.5;
  double lambda_nc = 5e-4;

  /// Throws InputError for negative or non-finite weights.
  void validate() const;
};

// Every loss below has an optional gradient output: when `grad` is non-empty
// it must match the differentiated argument's size, and `scale * dL/dx` is
// added to it.

/// Mean squared nearest-neighbour distance from p to q plus from q to p.
/// `grad_p` receives the gradient with respect to p (q is held fixed).
double chamfer(std::span<const Vec3> p, std::span<const Vec3> q, std::span<Vec3> grad_p = {}, double scale = 1.0);
double chamfer(const PointCloud& p, const PointCloud& q);

/// Mean over vertices of |v_i - mean(1-ring of v_i)|^2.
double laplacian_loss(const TriangleMesh& mesh, std::span<Vec3> grad = {}, double scale = 1.0);
double laplacian_loss(const TriangleMesh& mesh, const VertexAdjacency& adjacency, std::span<Vec3> grad = {},
                      double scale = 1.0);

struct NormalConsistency {
  double value = 0.0;
  std::size_t edges = 0;    ///< interior edges that contributed
  std::size_t skipped = 0;  ///< interior edges next to a degenerate face
};

/// Mean over interior edges of 1 - cos(angle between the two incident face normals).
NormalConsistency normal_consistency_loss(const TriangleMesh& mesh, std::span<Vec3> grad = {}, double scale = 1.0);
NormalConsistency normal_consistency_loss(const TriangleMesh& mesh, std::span<const EdgeFaces> edges,
                                          std::span<Vec3> grad = {}, double scale = 1.0);

/// Mean over vertices of |pred_i - target_i|^2. Throws CorrespondenceError
/// when vertex counts differ or the target is not flagged as corresponding.
double mse_loss(const TriangleMesh& pred, const TriangleMesh& target, std::span<Vec3> grad = {}, double scale = 1.0);

struct LossBreakdown {
  double total = 0.0;
  double chamfer = 0.0;
  double laplacian = 0.0;
  double normal = 0.0;
  std::size_t skipped_edges = 0;
};

/// chamfer(pred_samples, target_samples) + lambda_lap * laplacian(pred) + lambda_nc * normal(pred).
LossBreakdown total_loss(const TriangleMesh& pred, const PointCloud& target_samples, const PointCloud& pred_samples,
                         const LossWeights& weights);

}  // namespace ctaflow
