#include "ctaflow/velocity_field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctaflow/errors.hpp"

namespace ctaflow {
namespace {

void require_dims(const GridDims& d) {
  if (d.nx < 2 || d.ny < 2 || d.nz < 2) {
    throw SizeError("velocity grid needs at least 2 nodes per axis, got " + std::to_string(d.nx) + "x" +
                    std::to_string(d.ny) + "x" + std::to_string(d.nz));
  }
}

struct AxisWeights {
  int i0;
  double w0;
  double w1;
  double dw;  // d w1 / dx; d w0 / dx = -dw
};

inline AxisWeights axis_weights(double x, int n) {
  const double half = 0.5 * (n - 1);
  const bool inside = x > -1.0 && x < 1.0;
  const double c = std::clamp(x, -1.0, 1.0);
  const double u = (c + 1.0) * half;
  int i0 = static_cast<int>(std::floor(u));
  i0 = std::clamp(i0, 0, n - 2);
  const double f = u - i0;
  return {i0, 1.0 - f, f, inside ? half : 0.0};
}

}  // namespace

VelocityGrid::VelocityGrid(GridDims dims) : dims_(dims) {
  require_dims(dims);
  values_.assign(dims.node_count(), Vec3{});
}

VelocityGrid VelocityGrid::from_function(GridDims dims, const std::function<Vec3(const Vec3&)>& field) {
  VelocityGrid grid(dims);
  for (int k = 0; k < dims.nz; ++k) {
    for (int j = 0; j < dims.ny; ++j) {
      for (int i = 0; i < dims.nx; ++i) grid.at(i, j, k) = field(grid.node_position(i, j, k));
    }
  }
  return grid;
}

Vec3 VelocityGrid::node_position(int i, int j, int k) const {
  return {-1.0 + spacing(0) * i, -1.0 + spacing(1) * j, -1.0 + spacing(2) * k};
}

void VelocityGrid::check_finite() const {
  for (std::size_t n = 0; n < values_.size(); ++n) {
    if (!is_finite(values_[n])) throw NumericError("velocity grid node " + std::to_string(n) + " is not finite");
  }
}

TrilinearStencil trilinear_stencil(const GridDims& dims, const Vec3& x) {
  const AxisWeights ax = axis_weights(x.x, dims.nx);
  const AxisWeights ay = axis_weights(x.y, dims.ny);
  const AxisWeights az = axis_weights(x.z, dims.nz);
  const std::array<double, 2> wx{ax.w0, ax.w1};
  const std::array<double, 2> wy{ay.w0, ay.w1};
  const std::array<double, 2> wz{az.w0, az.w1};
  const std::array<double, 2> dx{-ax.dw, ax.dw};
  const std::array<double, 2> dy{-ay.dw, ay.dw};
  const std::array<double, 2> dz{-az.dw, az.dw};

  const std::size_t nx = static_cast<std::size_t>(dims.nx);
  const std::size_t nxy = nx * static_cast<std::size_t>(dims.ny);
  const std::size_t base = static_cast<std::size_t>(ax.i0) + nx * static_cast<std::size_t>(ay.i0) +
                           nxy * static_cast<std::size_t>(az.i0);

  TrilinearStencil s;
  for (int c = 0; c < 8; ++c) {
    const int a = c & 1;
    const int b = (c >> 1) & 1;
    const int d = (c >> 2) & 1;
    s.index[c] = static_cast<std::uint32_t>(base + a + nx * b + nxy * d);
    s.weight[c] = wx[a] * wy[b] * wz[d];
    s.dweight[c] = {dx[a] * wy[b] * wz[d], wx[a] * dy[b] * wz[d], wx[a] * wy[b] * dz[d]};
  }
  return s;
}

Vec3 lerp_sample(const VelocityGrid& grid, const Vec3& x) {
  if (!is_finite(x)) throw InputError("lerp_sample: query point is not finite");
  const TrilinearStencil s = trilinear_stencil(grid.dims(), x);
  const auto values = grid.values();
  Vec3 out;
  for (int c = 0; c < 8; ++c) out += values[s.index[c]] * s.weight[c];
  return out;
}

std::vector<GridDims> pyramid_level_dims(int levels, GridDims finest) {
  if (levels < 1) throw SizeError("pyramid needs at least one level");
  require_dims(finest);
  std::vector<GridDims> dims(static_cast<std::size_t>(levels));
  dims.back() = finest;
  for (int r = levels - 2; r >= 0; --r) {
    const GridDims& next = dims[static_cast<std::size_t>(r) + 1];
    if (next.nx % 2 || next.ny % 2 || next.nz % 2) {
      throw SizeError("pyramid level " + std::to_string(r + 1) + " dims are not divisible by 2");
    }
    dims[static_cast<std::size_t>(r)] = {next.nx / 2, next.ny / 2, next.nz / 2};
    require_dims(dims[static_cast<std::size_t>(r)]);
  }
  return dims;
}

VelocityPyramid::VelocityPyramid(int levels, int channels, GridDims finest)
    : VelocityPyramid(channels, pyramid_level_dims(levels, finest)) {}

VelocityPyramid::VelocityPyramid(int channels, std::vector<GridDims> level_dims)
    : levels_(static_cast<int>(level_dims.size())), channels_(channels) {
  if (channels < 1) throw SizeError("pyramid needs at least one channel per level");
  if (level_dims.empty()) throw SizeError("pyramid needs at least one level");
  if (pyramid_level_dims(levels_, level_dims.back()) != level_dims) {
    throw SizeError("pyramid resolution must halve exactly between adjacent levels");
  }
  grids_.reserve(level_dims.size() * static_cast<std::size_t>(channels));
  for (const GridDims& d : level_dims) {
    for (int m = 0; m < channels; ++m) grids_.emplace_back(d);
  }
}

std::size_t VelocityPyramid::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const VelocityGrid& g : grids_) n += 3 * g.node_count();
  return n;
}

VelocityPyramid VelocityPyramid::zeros_like() const {
  VelocityPyramid out = *this;
  for (VelocityGrid& g : out.grids_) std::fill(g.values().begin(), g.values().end(), Vec3{});
  return out;
}

std::vector<Vec3> sample_pyramid(const VelocityPyramid& pyramid, const Vec3& x) {
  if (!is_finite(x)) throw InputError("sample_pyramid: query point is not finite");
  std::vector<Vec3> out(pyramid.grid_count());
  for (int r = 0; r < pyramid.levels(); ++r) {
    const TrilinearStencil s = trilinear_stencil(pyramid.level_dims(r), x);
    for (int m = 0; m < pyramid.channels(); ++m) {
      const auto values = pyramid.grid(r, m).values();
      Vec3 v;
      for (int c = 0; c < 8; ++c) v += values[s.index[c]] * s.weight[c];
      out[pyramid.flat(r, m)] = v;
    }
  }
  return out;
}

}  // namespace ctaflow
