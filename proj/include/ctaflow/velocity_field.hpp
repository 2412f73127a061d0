#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ctaflow/vec3.hpp"

namespace ctaflow {

struct GridDims {
  int nx = 2;
  int ny = 2;
  int nz = 2;

  std::size_t node_count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  int operator[](int axis) const noexcept { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// The 8 grid nodes surrounding a query point with their trilinear weights.
/// `dweight[c]` is the derivative of `weight[c]` with respect to the query
/// position; it is zero along axes where the query was clamped to the domain.
struct TrilinearStencil {
  std::array<std::uint32_t, 8> index{};
  std::array<double, 8> weight{};
  std::array<Vec3, 8> dweight{};
};

/// A stationary velocity field sampled on a regular lattice spanning [-1,1]^3.
/// Values are stored x-fastest: node (i,j,k) lives at i + nx*(j + ny*k).
class VelocityGrid {
 public:
  VelocityGrid() = default;
  /// Zero field; throws SizeError when any dimension is below 2.
  explicit VelocityGrid(GridDims dims);

  static VelocityGrid from_function(GridDims dims, const std::function<Vec3(const Vec3&)>& field);

  const GridDims& dims() const noexcept { return dims_; }
  std::size_t node_count() const noexcept { return values_.size(); }

  std::span<Vec3> values() noexcept { return values_; }
  std::span<const Vec3> values() const noexcept { return values_; }

  std::size_t index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_.nx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.ny) * k);
  }
  Vec3& at(int i, int j, int k) { return values_[index(i, j, k)]; }
  const Vec3& at(int i, int j, int k) const { return values_[index(i, j, k)]; }

  /// Position of node (i,j,k) in the [-1,1]^3 domain.
  Vec3 node_position(int i, int j, int k) const;
  double spacing(int axis) const noexcept { return 2.0 / (dims_[axis] - 1); }

  /// Throws NumericError naming the first non-finite node.
  void check_finite() const;

  friend bool operator==(const VelocityGrid&, const VelocityGrid&) = default;

 private:
  GridDims dims_{};
  std::vector<Vec3> values_;
};

/// Stencil of `x` on a lattice of `dims` over [-1,1]^3, coordinates clamped to the box.
/// `x` must be finite.
TrilinearStencil trilinear_stencil(const GridDims& dims, const Vec3& x);

/// Trilinear interpolation with boundary clamping. Throws InputError for non-finite x.
Vec3 lerp_sample(const VelocityGrid& grid, const Vec3& x);

/// R resolution levels of M grids each; level R-1 (0-based) is finest and
/// every coarser level halves the node count per axis exactly.
class VelocityPyramid {
 public:
  VelocityPyramid() = default;
  VelocityPyramid(int levels, int channels, GridDims finest);
  /// Explicit per-level dims (coarsest first); validated for exact halving.
  VelocityPyramid(int channels, std::vector<GridDims> level_dims);

  int levels() const noexcept { return levels_; }
  int channels() const noexcept { return channels_; }
  std::size_t grid_count() const noexcept { return grids_.size(); }
  const GridDims& level_dims(int level) const { return grids_.at(flat(level, 0)).dims(); }

  VelocityGrid& grid(int level, int channel) { return grids_.at(flat(level, channel)); }
  const VelocityGrid& grid(int level, int channel) const { return grids_.at(flat(level, channel)); }
  std::span<VelocityGrid> grids() noexcept { return grids_; }
  std::span<const VelocityGrid> grids() const noexcept { return grids_; }

  /// Row-major (level, channel) position.
  std::size_t flat(int level, int channel) const noexcept {
    return static_cast<std::size_t>(level) * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(channel);
  }

  std::size_t scalar_count() const noexcept;
  VelocityPyramid zeros_like() const;

  friend bool operator==(const VelocityPyramid&, const VelocityPyramid&) = default;

 private:
  int levels_ = 0;
  int channels_ = 0;
  std::vector<VelocityGrid> grids_;
};

/// Dims of each level for a finest lattice; throws SizeError unless every
/// halving is exact and leaves at least 2 nodes per axis.
std::vector<GridDims> pyramid_level_dims(int levels, GridDims finest);

/// Every SVF of the pyramid sampled at x, row-major (level, channel).
std::vector<Vec3> sample_pyramid(const VelocityPyramid& pyramid, const Vec3& x);

}  // namespace ctaflow
