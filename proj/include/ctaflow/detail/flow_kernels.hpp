#pragma once

#include <span>
#include <vector>

#include "ctaflow/velocity_field.hpp"

namespace ctaflow::detail {

/// Unchecked access to the pyramid's node arrays for the integration hot loops.
struct PyramidView {
  int levels = 0;
  int channels = 0;
  std::vector<GridDims> dims;
  std::vector<const Vec3*> data;  // row-major (level, channel)

  explicit PyramidView(const VelocityPyramid& pyramid)
      : levels(pyramid.levels()), channels(pyramid.channels()) {
    for (int r = 0; r < levels; ++r) dims.push_back(pyramid.level_dims(r));
    for (const VelocityGrid& g : pyramid.grids()) data.push_back(g.values().data());
  }
};

/// Attention-weighted velocity at x: sum_r sum_c w_c * sum_m p[r,m] * V[r,m][idx_c].
inline Vec3 blended_velocity(const PyramidView& pyr, const double* p, const Vec3& x) {
  Vec3 v;
  for (int r = 0; r < pyr.levels; ++r) {
    const TrilinearStencil s = trilinear_stencil(pyr.dims[static_cast<std::size_t>(r)], x);
    const Vec3* const* grids = pyr.data.data() + static_cast<std::size_t>(r) * pyr.channels;
    const double* pr = p + static_cast<std::size_t>(r) * pyr.channels;
    for (int c = 0; c < 8; ++c) {
      Vec3 node;
      for (int m = 0; m < pyr.channels; ++m) node += grids[m][s.index[c]] * pr[m];
      v += node * s.weight[c];
    }
  }
  return v;
}

/// J^T g for the Jacobian J of blended_velocity with respect to x.
inline Vec3 blended_velocity_vjp(const PyramidView& pyr, const double* p, const Vec3& x, const Vec3& g) {
  Vec3 out;
  for (int r = 0; r < pyr.levels; ++r) {
    const TrilinearStencil s = trilinear_stencil(pyr.dims[static_cast<std::size_t>(r)], x);
    const Vec3* const* grids = pyr.data.data() + static_cast<std::size_t>(r) * pyr.channels;
    const double* pr = p + static_cast<std::size_t>(r) * pyr.channels;
    for (int c = 0; c < 8; ++c) {
      double proj = 0.0;
      for (int m = 0; m < pyr.channels; ++m) proj += dot(grids[m][s.index[c]], g) * pr[m];
      out += s.dweight[c] * proj;
    }
  }
  return out;
}

}  // namespace ctaflow::detail
