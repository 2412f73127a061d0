#include <doctest.h>

#include <cmath>
#include <random>

#include "ctaflow/errors.hpp"
#include "ctaflow/velocity_field.hpp"
#include "support.hpp"

using namespace ctaflow;
using test_support::random_point;

namespace {

// Scalar reference: clamp each coordinate, locate the cell, blend 8 corners.
Vec3 reference_lerp(const VelocityGrid& g, Vec3 x) {
  const GridDims d = g.dims();
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::min(1.0, std::max(-1.0, x[a]));
    const double u = (c + 1.0) * 0.5 * (d[a] - 1);
    int i = static_cast<int>(std::floor(u));
    if (i > d[a] - 2) i = d[a] - 2;
    i0[a] = i;
    f[a] = u - i;
  }
  Vec3 out{};
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
        out += g.at(i0[0] + dx, i0[1] + dy, i0[2] + dz) * w;
      }
    }
  }
  return out;
}

VelocityGrid random_grid(GridDims dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VelocityGrid g(dims);
  for (Vec3& v : g.values()) v = random_point(rng);
  return g;
}

}  // namespace

TEST_CASE("grid construction") {
  CHECK_THROWS_AS(VelocityGrid(GridDims{1, 4, 4}), SizeError);
  const VelocityGrid g(GridDims{3, 4, 5});
  CHECK(g.node_count() == 60);
  CHECK(g.index(2, 3, 4) == 59);
  CHECK(g.node_position(0, 0, 0) == Vec3{-1, -1, -1});
  CHECK(g.node_position(2, 3, 4) == Vec3{1, 1, 1});
  CHECK(g.spacing(0) == doctest::Approx(1.0));
}

TEST_CASE("lerp reproduces nodes") {
  const VelocityGrid g = random_grid({5, 6, 7}, 1);
  for (int k = 0; k < 7; ++k) {
    for (int j = 0; j < 6; ++j) {
      for (int i = 0; i < 5; ++i) {
        CHECK(norm(lerp_sample(g, g.node_position(i, j, k)) - g.at(i, j, k)) < 1e-12);
      }
    }
  }
}

TEST_CASE("lerp is exact on affine fields") {
  const auto field = [](const Vec3& x) {
    return Vec3{0.3 * x.x - 0.2 * x.y + 0.1 * x.z + 0.05, -0.4 * x.x + 0.7 * x.z, 0.25 * x.y - 0.1};
  };
  const VelocityGrid g = VelocityGrid::from_function({9, 5, 12}, field);
  std::mt19937_64 rng(2);
  for (int n = 0; n < 1000; ++n) {
    const Vec3 x = random_point(rng, -0.999, 0.999);
    CHECK(norm(lerp_sample(g, x) - field(x)) < 1e-6);
  }
}

TEST_CASE("clamping outside the box") {
  VelocityGrid g(GridDims{4, 4, 4});
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < 4; ++j) g.at(3, j, k) = {1.0, 2.0, 3.0};
  }
  CHECK(lerp_sample(g, {2.0, 0.0, 0.0}) == Vec3{1.0, 2.0, 3.0});
  const VelocityGrid r = random_grid({6, 5, 4}, 3);
  std::mt19937_64 rng(4);
  for (int n = 0; n < 500; ++n) {
    const Vec3 x = random_point(rng, -3.0, 3.0);
    CHECK(norm(lerp_sample(r, x) - reference_lerp(r, x)) < 1e-12);
  }
  CHECK_THROWS_AS(lerp_sample(r, {NAN, 0, 0}), InputError);
  CHECK_THROWS_AS(lerp_sample(r, {0, INFINITY, 0}), InputError);
}

TEST_CASE("piecewise linear between node planes") {
  const VelocityGrid g = random_grid({5, 5, 5}, 5);
  std::mt19937_64 rng(6);
  for (int n = 0; n < 200; ++n) {
    Vec3 x = random_point(rng, -0.99, 0.99);
    const double h = g.spacing(0);
    const double u = (x.x + 1.0) / h;
    const double lo = -1.0 + std::floor(u) * h;
    const Vec3 a{lo, x.y, x.z};
    const Vec3 b{lo + h, x.y, x.z};
    const Vec3 m{lo + 0.5 * h, x.y, x.z};
    CHECK(norm(lerp_sample(g, m) - (lerp_sample(g, a) + lerp_sample(g, b)) * 0.5) < 1e-9);
  }
}

TEST_CASE("lipschitz bound") {
  const VelocityGrid g = random_grid({6, 7, 5}, 7);
  // max adjacent-node difference per axis over spacing, combined over axes
  double lip2 = 0.0;
  const GridDims d = g.dims();
  for (int axis = 0; axis < 3; ++axis) {
    double worst = 0.0;
    for (int k = 0; k < d.nz; ++k) {
      for (int j = 0; j < d.ny; ++j) {
        for (int i = 0; i < d.nx; ++i) {
          int n[3] = {i, j, k};
          if (n[axis] + 1 >= d[axis]) continue;
          int m[3] = {i, j, k};
          ++m[axis];
          worst = std::max(worst, norm(g.at(m[0], m[1], m[2]) - g.at(i, j, k)));
        }
      }
    }
    lip2 += (worst / g.spacing(axis)) * (worst / g.spacing(axis));
  }
  const double lip = std::sqrt(lip2);
  std::mt19937_64 rng(8);
  for (int n = 0; n < 2000; ++n) {
    const Vec3 x = random_point(rng, -1.2, 1.2);
    const Vec3 y = random_point(rng, -1.2, 1.2);
    CHECK(norm(lerp_sample(g, x) - lerp_sample(g, y)) <= lip * norm(x - y) + 1e-12);
  }
}

TEST_CASE("stencil weights and derivatives") {
  const GridDims dims{5, 4, 6};
  std::mt19937_64 rng(9);
  const VelocityGrid g = random_grid(dims, 10);
  for (int n = 0; n < 200; ++n) {
    const Vec3 x = random_point(rng, -0.98, 0.98);
    const TrilinearStencil s = trilinear_stencil(dims, x);
    double sum = 0.0;
    Vec3 v{};
    for (int c = 0; c < 8; ++c) {
      sum += s.weight[c];
      v += g.values()[s.index[c]] * s.weight[c];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(norm(v - lerp_sample(g, x)) < 1e-12);

    // weight derivative against central differences of the weights
    const double eps = 1e-6;
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 xp = x, xm = x;
      xp[axis] += eps;
      xm[axis] -= eps;
      // the field is only piecewise smooth; skip intervals that cross a node plane
      if (trilinear_stencil(dims, xp).index[0] != trilinear_stencil(dims, xm).index[0]) continue;
      const Vec3 fd = (lerp_sample(g, xp) - lerp_sample(g, xm)) / (2 * eps);
      Vec3 an{};
      for (int c = 0; c < 8; ++c) an += g.values()[s.index[c]] * s.dweight[c][axis];
      CHECK(norm(fd - an) < 1e-6 * std::max(1.0, norm(an)));
    }
  }
  // clamped axes carry no derivative
  const TrilinearStencil out = trilinear_stencil(dims, {1.5, 0.1, -3.0});
  for (int c = 0; c < 8; ++c) {
    CHECK(out.dweight[c].x == 0.0);
    CHECK(out.dweight[c].z == 0.0);
  }
}

TEST_CASE("gradient with respect to grid values is the weight stencil") {
  VelocityGrid g = random_grid({4, 5, 4}, 11);
  const Vec3 x{0.13, -0.41, 0.77};
  const TrilinearStencil s = trilinear_stencil(g.dims(), x);
  const double eps = 1e-6;
  for (std::size_t node = 0; node < g.node_count(); ++node) {
    const double base = g.values()[node].y;
    g.values()[node].y = base + eps;
    const double up = lerp_sample(g, x).y;
    g.values()[node].y = base - eps;
    const double down = lerp_sample(g, x).y;
    g.values()[node].y = base;
    double expected = 0.0;
    for (int c = 0; c < 8; ++c) {
      if (s.index[c] == node) expected += s.weight[c];
    }
    CHECK((up - down) / (2 * eps) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("pyramid layout") {
  const VelocityPyramid p(3, 4, {32, 32, 32});
  CHECK(p.levels() == 3);
  CHECK(p.channels() == 4);
  CHECK(p.grid_count() == 12);
  CHECK(p.level_dims(0) == GridDims{8, 8, 8});
  CHECK(p.level_dims(1) == GridDims{16, 16, 16});
  CHECK(p.level_dims(2) == GridDims{32, 32, 32});
  CHECK(p.scalar_count() == 3 * 4 * (512 + 4096 + 32768));
  CHECK_THROWS_AS(VelocityPyramid(3, 4, {30, 32, 32}), SizeError);
  CHECK_THROWS_AS(VelocityPyramid(4, 1, {8, 8, 8}), SizeError);
  CHECK_THROWS_AS(VelocityPyramid(2, {GridDims{4, 4, 4}, GridDims{6, 8, 8}}), SizeError);
  CHECK_NOTHROW(VelocityPyramid(2, {GridDims{4, 4, 4}, GridDims{8, 8, 8}}));
}

TEST_CASE("sample_pyramid") {
  SUBCASE("single grid matches lerp") {
    VelocityPyramid p(1, 1, {5, 5, 5});
    p.grid(0, 0) = random_grid({5, 5, 5}, 12);
    const Vec3 x{0.2, -0.3, 0.9};
    const auto s = sample_pyramid(p, x);
    REQUIRE(s.size() == 1);
    CHECK(s[0] == lerp_sample(p.grid(0, 0), x));
  }
  SUBCASE("zero pyramid") {
    const VelocityPyramid p(2, 3, {8, 8, 8});
    for (const Vec3& v : sample_pyramid(p, {0.4, 0.1, -0.2})) CHECK(v == Vec3{});
  }
  SUBCASE("constants interpolate to themselves") {
    VelocityPyramid p(3, 4, {16, 16, 16});
    for (int r = 0; r < 3; ++r) {
      for (int m = 0; m < 4; ++m) {
        for (Vec3& v : p.grid(r, m).values()) v = {double(r + 1), double(m + 1), 0.0};
      }
    }
    std::mt19937_64 rng(13);
    for (int n = 0; n < 50; ++n) {
      const auto s = sample_pyramid(p, random_point(rng, -1.5, 1.5));
      for (int r = 0; r < 3; ++r) {
        for (int m = 0; m < 4; ++m) {
          const Vec3 v = s[p.flat(r, m)];
          CHECK(v.x == doctest::Approx(r + 1).epsilon(1e-12));
          CHECK(v.y == doctest::Approx(m + 1).epsilon(1e-12));
          CHECK(v.z == 0.0);
        }
      }
    }
  }
}

TEST_CASE("non-finite grid values are reported") {
  VelocityGrid g(GridDims{3, 3, 3});
  CHECK_NOTHROW(g.check_finite());
  g.values()[5].y = NAN;
  CHECK_THROWS_AS(g.check_finite(), NumericError);
}
