#include "ctaflow/losses.hpp"

#include <cmath>
#include <string>

#include "ctaflow/errors.hpp"
#include "ctaflow/nearest.hpp"

namespace ctaflow {
namespace {

void check_grad(std::span<Vec3> grad, std::size_t n, const char* what) {
  if (!grad.empty() && grad.size() != n) throw SizeError(std::string(what) + ": gradient buffer has the wrong size");
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda_lap >= 0.0) || !(lambda_nc >= 0.0) || !std::isfinite(lambda_lap) || !std::isfinite(lambda_nc)) {
    throw InputError("loss weights must be finite and non-negative");
  }
}

double chamfer(std::span<const Vec3> p, std::span<const Vec3> q, std::span<Vec3> grad_p, double scale) {
  if (p.empty() || q.empty()) throw InputError("chamfer distance needs two non-empty point clouds");
  check_grad(grad_p, p.size(), "chamfer");

  const PointIndex q_index(q);
  const PointIndex p_index(p);
  const double wp = 1.0 / static_cast<double>(p.size());
  const double wq = 1.0 / static_cast<double>(q.size());

  double forward = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const NearestHit hit = q_index.nearest(p[i]);
    forward += hit.distance2;
    if (!grad_p.empty()) grad_p[i] += (p[i] - q[hit.index]) * (2.0 * wp * scale);
  }
  double backward = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const NearestHit hit = p_index.nearest(q[j]);
    backward += hit.distance2;
    if (!grad_p.empty()) grad_p[hit.index] += (p[hit.index] - q[j]) * (2.0 * wq * scale);
  }
  return forward * wp + backward * wq;
}

double chamfer(const PointCloud& p, const PointCloud& q) { return chamfer(p.points, q.points); }

double laplacian_loss(const TriangleMesh& mesh, std::span<Vec3> grad, double scale) {
  return laplacian_loss(mesh, build_adjacency(mesh), grad, scale);
}

double laplacian_loss(const TriangleMesh& mesh, const VertexAdjacency& adjacency, std::span<Vec3> grad,
                      double scale) {
  const std::size_t n = mesh.vertices.size();
  if (n == 0) throw InputError("laplacian loss of an empty mesh");
  if (adjacency.offsets.size() != n + 1) throw SizeError("adjacency does not match the mesh");
  check_grad(grad, n, "laplacian loss");

  const double w = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const auto ring = adjacency.ring(v);
    if (ring.empty()) throw TopologyError("vertex " + std::to_string(v) + " has an empty 1-ring");
    Vec3 mean;
    for (std::uint32_t j : ring) mean += mesh.vertices[j];
    const double inv = 1.0 / static_cast<double>(ring.size());
    const Vec3 d = mesh.vertices[v] - mean * inv;
    total += norm2(d);
    if (!grad.empty()) {
      const Vec3 g = d * (2.0 * w * scale);
      grad[v] += g;
      for (std::uint32_t j : ring) grad[j] -= g * inv;
    }
  }
  return total * w;
}

NormalConsistency normal_consistency_loss(const TriangleMesh& mesh, std::span<Vec3> grad, double scale) {
  const std::vector<EdgeFaces> edges = edge_faces(mesh);
  return normal_consistency_loss(mesh, edges, grad, scale);
}

NormalConsistency normal_consistency_loss(const TriangleMesh& mesh, std::span<const EdgeFaces> edges,
                                          std::span<Vec3> grad, double scale) {
  check_grad(grad, mesh.vertices.size(), "normal consistency");
  const FaceNormals normals = face_normals(mesh);

  NormalConsistency out;
  std::vector<const EdgeFaces*> used;
  used.reserve(edges.size());
  double total = 0.0;
  for (const EdgeFaces& e : edges) {
    if (e.incident != 2) continue;
    if (normals.degenerate[e.faces[0]] || normals.degenerate[e.faces[1]]) {
      ++out.skipped;
      continue;
    }
    total += 1.0 - dot(normals.normals[e.faces[0]], normals.normals[e.faces[1]]);
    used.push_back(&e);
  }
  out.edges = used.size();
  if (used.empty()) return out;
  const double w = 1.0 / static_cast<double>(used.size());
  out.value = total * w;
  if (grad.empty()) return out;

  // d/dn1 (1 - n1.n2) = -n2; n = c/|c| with c = (b - a) x (c - a).
  std::vector<Vec3> dnormal(mesh.faces.size());
  for (const EdgeFaces* e : used) {
    dnormal[e->faces[0]] -= normals.normals[e->faces[1]] * (w * scale);
    dnormal[e->faces[1]] -= normals.normals[e->faces[0]] * (w * scale);
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (normals.degenerate[f] || norm2(dnormal[f]) == 0.0) continue;
    const Face& face = mesh.faces[f];
    const Vec3& a = mesh.vertices[face[0]];
    const Vec3 e1 = mesh.vertices[face[1]] - a;
    const Vec3 e2 = mesh.vertices[face[2]] - a;
    const Vec3 c = cross(e1, e2);
    const Vec3& n = normals.normals[f];
    const Vec3 gc = (dnormal[f] - n * dot(n, dnormal[f])) / norm(c);
    const Vec3 g1 = cross(e2, gc);
    const Vec3 g2 = cross(gc, e1);
    grad[face[1]] += g1;
    grad[face[2]] += g2;
    grad[face[0]] -= g1 + g2;
  }
  return out;
}

double mse_loss(const TriangleMesh& pred, const TriangleMesh& target, std::span<Vec3> grad, double scale) {
  if (pred.vertices.size() != target.vertices.size()) {
    throw CorrespondenceError("mse loss needs matching vertex counts, got " + std::to_string(pred.vertices.size()) +
                              " and " + std::to_string(target.vertices.size()));
  }
  if (!target.correspondence) throw CorrespondenceError("mse loss target is not flagged as in correspondence");
  if (pred.vertices.empty()) throw InputError("mse loss of empty meshes");
  check_grad(grad, pred.vertices.size(), "mse loss");

  const double w = 1.0 / static_cast<double>(pred.vertices.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.vertices.size(); ++i) {
    const Vec3 d = pred.vertices[i] - target.vertices[i];
    total += norm2(d);
    if (!grad.empty()) grad[i] += d * (2.0 * w * scale);
  }
  return total * w;
}

LossBreakdown total_loss(const TriangleMesh& pred, const PointCloud& target_samples, const PointCloud& pred_samples,
                         const LossWeights& weights) {
  weights.validate();
  LossBreakdown out;
  out.chamfer = chamfer(pred_samples, target_samples);
  out.laplacian = laplacian_loss(pred);
  const NormalConsistency nc = normal_consistency_loss(pred);
  out.normal = nc.value;
  out.skipped_edges = nc.skipped;
  out.total = out.chamfer + weights.lambda_lap * out.laplacian + weights.lambda_nc * out.normal;
  return out;
}

}  // namespace ctaflow
