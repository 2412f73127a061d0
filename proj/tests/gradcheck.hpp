#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ctaflow/autodiff.hpp"
#include "ctaflow/losses.hpp"
#include "ctaflow/random.hpp"
#include "support.hpp"

namespace test_support {

enum class GradLoss { kChamfer, kMse };

// Small composed problem: R=2, M=2, 4^3 finest grid, 42-vertex sphere, K=4.
struct SmallProblem {
  ctaflow::FlowModel model;
  ctaflow::TriangleMesh source;
  ctaflow::TriangleMesh target;
  ctaflow::FlowConfig flow;
  double a = 38.0;
  GradLoss loss = GradLoss::kChamfer;

  static SmallProblem make(GradLoss loss, std::uint64_t seed) {
    using namespace ctaflow;
    SmallProblem p;
    p.loss = loss;
    p.flow.steps = 4;
    p.model.pyramid = VelocityPyramid(2, 2, {4, 4, 4});
    std::mt19937_64 rng(seed);
    for (VelocityGrid& g : p.model.pyramid.grids()) {
      for (Vec3& v : g.values()) v = random_point(rng, -0.3, 0.3);
    }
    AttentionConfig cfg;
    cfg.levels = 2;
    cfg.channels = 2;
    cfg.hidden = {8, 8};
    p.model.net = AttentionNet::initialized(cfg, seed + 1);
    for (DenseLayer& l : p.model.net.layers()) {
      for (double& b : l.bias) b = uniform(rng, -0.5, 0.5);
      for (double& w : l.weight) w += uniform(rng, -0.5, 0.5);
    }
    p.source = make_icosphere(1, 0.5);
    p.target = jitter(make_icosphere(1, 0.6), 0.04, seed + 2);
    p.target.correspondence = true;
    return p;
  }

  double loss_value(const ctaflow::FlowModel& m) const {
    using namespace ctaflow;
    const std::vector<Vec3> x = integrate_points(source.vertices, m, a, 0.0, flow.horizon, flow.steps);
    if (loss == GradLoss::kMse) return mse_loss(source.with_vertices(x), target);
    return chamfer(x, target.vertices);
  }

  // Analytic gradient through the recorded tape, flattened like ParameterSet.
  std::vector<double> gradient(double scale = 1.0) const {
    using namespace ctaflow;
    FlowTape tape;
    const std::vector<Vec3> x = integrate_recorded(source.vertices, model, a, flow, tape);
    std::vector<Vec3> gx(x.size());
    if (loss == GradLoss::kMse) {
      mse_loss(source.with_vertices(x), target, gx, scale);
    } else {
      chamfer(x, target.vertices, gx, scale);
    }
    FlowModel grad = model.zeros_like();
    backward(tape, model, gx, grad);
    return ParameterSet::pack(grad);
  }
};

struct GradCheckResult {
  double worst_relative = 0.0;
  int probes = 0;
};

// Central differences with step `delta` at `probes` random parameters.
inline GradCheckResult finite_difference_check(const SmallProblem& p, int probes, double delta, std::uint64_t seed) {
  using namespace ctaflow;
  const std::vector<double> analytic = p.gradient();
  std::vector<double> flat = ParameterSet::pack(p.model);
  FlowModel probe = p.model;
  std::mt19937_64 rng(seed);
  GradCheckResult out;
  const std::size_t grid_scalars = p.model.pyramid.scalar_count();
  for (int n = 0; n < probes; ++n) {
    // half the probes on grid values, half on network weights
    const std::size_t i = (n % 2 == 0) ? static_cast<std::size_t>(rng() % grid_scalars)
                                       : grid_scalars + static_cast<std::size_t>(rng() % (flat.size() - grid_scalars));
    const double v = flat[i];
    flat[i] = v + delta;
    ParameterSet::unpack(flat, probe);
    const double up = p.loss_value(probe);
    flat[i] = v - delta;
    ParameterSet::unpack(flat, probe);
    const double down = p.loss_value(probe);
    flat[i] = v;
    const double fd = (up - down) / (2.0 * delta);
    const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-9});
    out.worst_relative = std::max(out.worst_relative, std::abs(fd - analytic[i]) / scale);
    ++out.probes;
  }
  return out;
}

}  // namespace test_support
