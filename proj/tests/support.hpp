#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "ctaflow/mesh.hpp"
#include "ctaflow/random.hpp"

namespace test_support {

using ctaflow::Face;
using ctaflow::TriangleMesh;
using ctaflow::Vec3;

inline Vec3 random_point(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return {ctaflow::uniform(rng, lo, hi), ctaflow::uniform(rng, lo, hi), ctaflow::uniform(rng, lo, hi)};
}

// Two interpenetrating regular tetrahedra (a stella octangula) in one mesh.
inline TriangleMesh stella_octangula() {
  TriangleMesh m;
  m.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}, {-1, -1, -1}, {-1, 1, 1}, {1, -1, 1}, {1, 1, -1}};
  for (Vec3& v : m.vertices) v = v * 0.5;
  m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}, {4, 5, 6}, {4, 7, 5}, {4, 6, 7}, {5, 7, 6}};
  return m;
}

inline TriangleMesh regular_tetrahedron() {
  TriangleMesh m;
  m.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return m;
}

// n x n quad grid on a torus (both directions wrap), each quad split in two.
inline TriangleMesh torus_grid(int n, double big = 0.6, double small = 0.2) {
  TriangleMesh m;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = 2.0 * M_PI * i / n;
      const double v = 2.0 * M_PI * j / n;
      m.vertices.push_back({(big + small * std::cos(v)) * std::cos(u), (big + small * std::cos(v)) * std::sin(u),
                            small * std::sin(v)});
    }
  }
  auto id = [n](int i, int j) { return static_cast<std::uint32_t>(((i + n) % n) * n + (j + n) % n); };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

// Planar (z = 0) grid of n x n quads over [-s, s]^2, each split in two.
inline TriangleMesh planar_grid(int n, double s = 0.5) {
  TriangleMesh m;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) m.vertices.push_back({-s + 2.0 * s * i / n, -s + 2.0 * s * j / n, 0.0});
  }
  auto id = [n](int i, int j) { return static_cast<std::uint32_t>(j * (n + 1) + i); };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

// Every vertex displaced by an independent random offset of up to `amount` per axis.
inline TriangleMesh jitter(const TriangleMesh& mesh, double amount, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v += random_point(rng, -amount, amount);
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / ("ctaflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test_support
