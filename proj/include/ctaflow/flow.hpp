#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ctaflow/attention.hpp"
#include "ctaflow/mesh.hpp"
#include "ctaflow/velocity_field.hpp"

namespace ctaflow {

/// Learnable state of a flow: the SVF pyramid and the attention network over it.
struct FlowModel {
  VelocityPyramid pyramid;
  AttentionNet net;

  /// Throws SizeError if the attention map shape differs from the pyramid's R x M.
  void validate() const;
  std::size_t scalar_count() const noexcept { return pyramid.scalar_count() + net.scalar_count(); }
  FlowModel zeros_like() const { return {pyramid.zeros_like(), net.zeros_like()}; }

  friend bool operator==(const FlowModel&, const FlowModel&) = default;
};

struct FlowConfig {
  int steps = 50;        ///< K
  double horizon = 1.0;  ///< T

  double step_size() const noexcept { return horizon / steps; }
  /// Throws InputError unless K >= 1 and T > 0.
  void validate() const;
};

/// Per-step snapshots of an integration: K+1 vertex sets and K attention maps.
struct TrajectoryLog {
  std::vector<double> times;                  // t of each attention evaluation
  std::vector<std::vector<double>> attention;  // row-major (level, channel)
  std::vector<std::vector<Vec3>> snapshots;    // snapshot 0 is the input
};

struct IntegrateOptions {
  bool record_trajectory = false;
  int workers = 1;
};

struct IntegrationResult {
  TriangleMesh mesh;
  std::optional<TrajectoryLog> trajectory;
  std::size_t out_of_domain = 0;  ///< input vertices outside [-1,1]^3
};

/// v_t(x; a) = sum over (r, m) of p^{r,m}(t, a) * v^{r,m}(x).
Vec3 ctvf_eval(const FlowModel& model, const Vec3& x, const Conditioning& c);

/// Forward Euler x_{k+1} = x_k + h * v_{t_k}(x_k; a) with t_k = t0 + k*h over
/// [t0, t1]. The attention map is computed once per step and shared by all points.
std::vector<Vec3> integrate_points(std::span<const Vec3> points, const FlowModel& model, double a, double t0,
                                   double t1, int steps, const IntegrateOptions& options = {},
                                   TrajectoryLog* trajectory = nullptr);

/// Deforms every vertex of `mesh` over [0, T]; connectivity is untouched.
IntegrationResult integrate(const TriangleMesh& mesh, const FlowModel& model, double a, const FlowConfig& config,
                            const IntegrateOptions& options = {});

}  // namespace ctaflow
