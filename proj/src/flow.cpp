#include "ctaflow/flow.hpp"

#include <cmath>
#include <string>

#include "ctaflow/detail/flow_kernels.hpp"
#include "ctaflow/errors.hpp"

namespace ctaflow {

void FlowModel::validate() const {
  if (net.levels() != pyramid.levels() || net.channels() != pyramid.channels()) {
    throw SizeError("attention map is " + std::to_string(net.levels()) + "x" + std::to_string(net.channels()) +
                    " but the pyramid holds " + std::to_string(pyramid.levels()) + "x" +
                    std::to_string(pyramid.channels()) + " fields");
  }
}

void FlowConfig::validate() const {
  if (steps < 1) throw InputError("integration needs K >= 1 steps");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("integration horizon must be positive");
}

Vec3 ctvf_eval(const FlowModel& model, const Vec3& x, const Conditioning& c) {
  model.validate();
  const std::vector<double> p = attention_map(model.net, c);
  const std::vector<Vec3> v = sample_pyramid(model.pyramid, x);
  Vec3 out;
  for (std::size_t j = 0; j < v.size(); ++j) out += v[j] * p[j];
  return out;
}

std::vector<Vec3> integrate_points(std::span<const Vec3> points, const FlowModel& model, double a, double t0,
                                   double t1, int steps, const IntegrateOptions& options, TrajectoryLog* trajectory) {
  model.validate();
  if (steps < 1) throw InputError("integration needs at least one step");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!is_finite(points[i])) throw IntegrationError("input vertex " + std::to_string(i) + " is not finite", 0, i);
  }

  const double h = (t1 - t0) / steps;
  std::vector<Vec3> x(points.begin(), points.end());
  if (trajectory) {
    *trajectory = {};
    trajectory->snapshots.push_back(x);
  }
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const int workers = options.workers < 1 ? 1 : options.workers;
  const detail::PyramidView view(model.pyramid);

  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    const std::vector<double> p = model.net.forward({t, a, {}});
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      x[i] += detail::blended_velocity(view, p.data(), x[i]) * h;
    }
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (!is_finite(x[i])) {
        throw IntegrationError("vertex " + std::to_string(i) + " became non-finite at step " + std::to_string(k), k,
                               static_cast<std::size_t>(i));
      }
    }
    if (trajectory) {
      trajectory->times.push_back(t);
      trajectory->attention.push_back(p);
      trajectory->snapshots.push_back(x);
    }
  }
  return x;
}

IntegrationResult integrate(const TriangleMesh& mesh, const FlowModel& model, double a, const FlowConfig& config,
                            const IntegrateOptions& options) {
  config.validate();
  IntegrationResult result;
  for (const Vec3& v : mesh.vertices) {
    if (std::abs(v.x) > 1.0 || std::abs(v.y) > 1.0 || std::abs(v.z) > 1.0) ++result.out_of_domain;
  }
  TrajectoryLog log;
  std::vector<Vec3> moved = integrate_points(mesh.vertices, model, a, 0.0, config.horizon, config.steps, options,
                                             options.record_trajectory ? &log : nullptr);
  result.mesh = mesh.with_vertices(std::move(moved));
  if (options.record_trajectory) result.trajectory = std::move(log);
  return result;
}

}  // namespace ctaflow
