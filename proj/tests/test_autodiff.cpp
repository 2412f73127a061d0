#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ctaflow/autodiff.hpp"
#include "ctaflow/errors.hpp"
#include "ctaflow/losses.hpp"
#include "gradcheck.hpp"

using namespace ctaflow;
using test_support::GradLoss;
using test_support::SmallProblem;

TEST_CASE("gradients agree with central differences (chamfer)") {
  const SmallProblem p = SmallProblem::make(GradLoss::kChamfer, 5);
  const auto r = test_support::finite_difference_check(p, 64, 1e-4, 17);
  CHECK(r.probes == 64);
  CHECK(r.worst_relative < 1e-4);
}

TEST_CASE("gradients agree with central differences (mse)") {
  const SmallProblem p = SmallProblem::make(GradLoss::kMse, 9);
  const auto r = test_support::finite_difference_check(p, 64, 1e-4, 23);
  CHECK(r.worst_relative < 1e-4);
}

TEST_CASE("zero field with target equal to the template is stationary") {
  SmallProblem p = SmallProblem::make(GradLoss::kMse, 3);
  p.model.pyramid = p.model.pyramid.zeros_like();
  p.target = p.source;
  p.target.correspondence = true;
  for (double g : p.gradient()) CHECK(g == 0.0);
}

TEST_CASE("scaling the loss scales every gradient") {
  const SmallProblem p = SmallProblem::make(GradLoss::kChamfer, 4);
  const std::vector<double> g1 = p.gradient(1.0);
  const std::vector<double> g2 = p.gradient(2.0);
  REQUIRE(g1.size() == g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == 2.0 * g1[i]);
}

TEST_CASE("adjoints agree with finite differences on the initial state") {
  const SmallProblem p = SmallProblem::make(GradLoss::kMse, 8);
  FlowTape tape;
  const std::vector<Vec3> x = integrate_recorded(p.source.vertices, p.model, p.a, p.flow, tape);
  std::vector<Vec3> gx(x.size());
  mse_loss(p.source.with_vertices(x), p.target, gx);
  FlowModel grad = p.model.zeros_like();
  const std::vector<Vec3> g0 = backward(tape, p.model, gx, grad);

  auto loss_from = [&](std::vector<Vec3> start) {
    const std::vector<Vec3> y = integrate_points(start, p.model, p.a, 0.0, p.flow.horizon, p.flow.steps);
    return mse_loss(p.source.with_vertices(y), p.target);
  };
  const double d = 1e-5;
  for (std::size_t i : {0u, 7u, 29u}) {
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<Vec3> up = p.source.vertices;
      std::vector<Vec3> down = p.source.vertices;
      up[i][axis] += d;
      down[i][axis] -= d;
      const double fd = (loss_from(up) - loss_from(down)) / (2 * d);
      CHECK(fd == doctest::Approx(g0[i][axis]).epsilon(1e-5));
    }
  }
}

TEST_CASE("late adjoints do not depend on earlier states") {
  const SmallProblem p = SmallProblem::make(GradLoss::kChamfer, 6);
  FlowTape tape;
  const std::vector<Vec3> x = integrate_recorded(p.source.vertices, p.model, p.a, p.flow, tape);
  std::vector<Vec3> gx(x.size());
  chamfer(x, p.target.vertices, gx);

  std::vector<std::vector<Vec3>> clean;
  FlowModel g1 = p.model.zeros_like();
  backward(tape, p.model, gx, g1, {&clean});
  REQUIRE(clean.size() == static_cast<std::size_t>(p.flow.steps) + 1);

  // The adjoint at step k depends only on states k..K-1.
  const int k = 2;
  FlowTape corrupted = tape;
  for (int j = 0; j < k; ++j) {
    for (Vec3& v : corrupted.states[static_cast<std::size_t>(j)]) v = v * 0.3 + Vec3{0.1, -0.2, 0.05};
  }
  std::vector<std::vector<Vec3>> dirty;
  FlowModel g2 = p.model.zeros_like();
  backward(corrupted, p.model, gx, g2, {&dirty});
  for (int j = k; j <= p.flow.steps; ++j) {
    CHECK(dirty[static_cast<std::size_t>(j)] == clean[static_cast<std::size_t>(j)]);
  }
  CHECK(dirty[0] != clean[0]);
}

TEST_CASE("backward errors") {
  const SmallProblem p = SmallProblem::make(GradLoss::kChamfer, 2);
  FlowModel grad = p.model.zeros_like();
  std::vector<Vec3> gx(p.source.vertices.size());

  SUBCASE("no tape") {
    FlowTape empty;
    CHECK_THROWS_AS(backward(empty, p.model, gx, grad), StateError);
  }
  SUBCASE("wrong seed size") {
    FlowTape tape;
    integrate_recorded(p.source.vertices, p.model, p.a, p.flow, tape);
    std::vector<Vec3> short_seed(3);
    CHECK_THROWS_AS(backward(tape, p.model, short_seed, grad), SizeError);
  }
  SUBCASE("non-finite seed names the grid") {
    FlowTape tape;
    integrate_recorded(p.source.vertices, p.model, p.a, p.flow, tape);
    gx[0] = {std::numeric_limits<double>::quiet_NaN(), 0, 0};
    try {
      backward(tape, p.model, gx, grad);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("velocity grid") != std::string::npos);
    }
  }
}

TEST_CASE("parameter set layout") {
  const SmallProblem p = SmallProblem::make(GradLoss::kChamfer, 1);
  ParameterSet set = ParameterSet::from_model(p.model);
  CHECK(set.values.size() == p.model.scalar_count());
  CHECK(set.gradient.size() == set.values.size());
  REQUIRE(set.blocks.size() == 4 + 2 * p.model.net.layers().size());
  CHECK(set.blocks[0].name == "grid[0,0]");
  CHECK(set.blocks[0].size == 3 * p.model.pyramid.grid(0, 0).node_count());
  CHECK(set.blocks[3].name == "grid[1,1]");
  CHECK(set.blocks[4].name == "attention.layer0.weight");
  std::size_t total = 0;
  for (const ParameterBlock& b : set.blocks) {
    CHECK(b.offset == total);
    total += b.size;
  }
  CHECK(total == set.values.size());
  CHECK(set.block_of(0).name == "grid[0,0]");
  CHECK(set.block_of(set.values.size() - 1).name == set.blocks.back().name);
  CHECK_THROWS_AS(set.block_of(set.values.size()), SizeError);

  FlowModel copy = p.model.zeros_like();
  set.store_into(copy);
  CHECK(copy == p.model);
  std::vector<double> too_short(set.values.size() - 1);
  CHECK_THROWS_AS(ParameterSet::unpack(too_short, copy), SizeError);
}

TEST_CASE("adam with zero gradient leaves parameters alone") {
  std::vector<double> params{1.0, -2.0, 3.0};
  const std::vector<double> before = params;
  AdamState state;
  AdamConfig cfg;
  adam_step(params, std::vector<double>{0.5, 0.5, 0.5}, state, cfg);
  const std::vector<double> m1 = state.m;
  const std::vector<double> after_first = params;
  adam_step(params, std::vector<double>(3, 0.0), state, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(state.m[i] == doctest::Approx(cfg.beta1 * m1[i]));
    CHECK(params[i] != after_first[i]);  // momentum still carries
  }

  std::vector<double> fresh = before;
  AdamState s2;
  adam_step(fresh, std::vector<double>(3, 0.0), s2, cfg);
  CHECK(fresh == before);
  CHECK(s2.step == 1);
}

TEST_CASE("adam first step is bounded by the learning rate") {
  std::mt19937_64 rng(4);
  std::vector<double> params(100), grads(100);
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] = uniform(rng, -1, 1);
    grads[i] = uniform(rng, -100, 100);
  }
  const std::vector<double> before = params;
  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  adam_step(params, grads, state, cfg);
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(std::abs(params[i] - before[i]) <= cfg.learning_rate * (1 + 1e-9));
  }
}

TEST_CASE("adam matches the reference recurrence") {
  const AdamConfig cfg{0.01, 0.8, 0.9, 1e-6};
  std::vector<double> p{0.5};
  AdamState s;
  double m = 0, v = 0, ref = 0.5;
  const double gs[] = {1.0, -0.5, 2.0, 0.25};
  for (int k = 1; k <= 4; ++k) {
    const double g = gs[k - 1];
    adam_step(p, std::vector<double>{g}, s, cfg);
    m = 0.8 * m + 0.2 * g;
    v = 0.9 * v + 0.1 * g * g;
    ref -= 0.01 * (m / (1 - std::pow(0.8, k))) / (std::sqrt(v / (1 - std::pow(0.9, k))) + 1e-6);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("adam shape mismatch") {
  std::vector<double> p(3);
  AdamState s;
  CHECK_THROWS_AS(adam_step(p, std::vector<double>(2), s, {}), StateError);
  adam_step(p, std::vector<double>(3), s, {});
  std::vector<double> q(4);
  CHECK_THROWS_AS(adam_step(q, std::vector<double>(4), s, {}), StateError);
}

TEST_CASE("global norm clipping") {
  std::vector<double> g{3.0, 4.0};
  CHECK(clip_global_norm(g, 10.0) == 5.0);
  CHECK(g == std::vector<double>{3.0, 4.0});
  CHECK(clip_global_norm(g, 1.0) == 5.0);
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  std::vector<double> z(4, 0.0);
  CHECK(clip_global_norm(z, 1.0) == 0.0);
}
