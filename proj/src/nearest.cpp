#include "ctaflow/nearest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctaflow/errors.hpp"

namespace ctaflow {

NearestHit nearest_brute(std::span<const Vec3> points, const Vec3& query) {
  if (points.empty()) throw InputError("nearest neighbour query on an empty point set");
  NearestHit best{0, norm2(points[0] - query)};
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d2 = norm2(points[i] - query);
    if (d2 < best.distance2) best = {static_cast<std::uint32_t>(i), d2};
  }
  return best;
}

PointIndex::PointIndex(std::span<const Vec3> points) : points_(points) {
  if (points.empty()) throw InputError("cannot index an empty point set");
  brute_ = points.size() < kBruteForceLimit;
  if (brute_) return;

  Vec3 lo = points[0];
  Vec3 hi = points[0];
  for (const Vec3& p : points) {
    if (!is_finite(p)) throw InputError("cannot index non-finite points");
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-12});
  const double target_cells = static_cast<double>(points.size()) / 2.0;
  cell_size_ = extent / std::cbrt(target_cells);
  // Flat or elongated sets end up with too few cells; shrink until the grid is dense enough.
  for (int iter = 0; iter < 40; ++iter) {
    double count = 1.0;
    for (int d = 0; d < 3; ++d) count *= std::floor((hi[d] - lo[d]) / cell_size_) + 1.0;
    if (count >= target_cells / 2.0) break;
    cell_size_ *= 0.8;
  }
  origin_ = lo;
  for (int d = 0; d < 3; ++d) cells_[d] = static_cast<int>(std::floor((hi[d] - lo[d]) / cell_size_)) + 1;

  const std::size_t total = static_cast<std::size_t>(cells_[0]) * cells_[1] * cells_[2];
  std::vector<std::uint32_t> cell_index(points.size());
  cell_start_.assign(total + 1, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::array<int, 3> c{};
    for (int d = 0; d < 3; ++d) {
      c[d] = std::clamp(static_cast<int>(std::floor((points[i][d] - origin_[d]) / cell_size_)), 0, cells_[d] - 1);
    }
    cell_index[i] = static_cast<std::uint32_t>(cell_of(c));
    ++cell_start_[cell_index[i] + 1];
  }
  for (std::size_t c = 0; c < total; ++c) cell_start_[c + 1] += cell_start_[c];
  order_.resize(points.size());
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) order_[fill[cell_index[i]]++] = static_cast<std::uint32_t>(i);
}

NearestHit PointIndex::nearest(const Vec3& query) const {
  if (brute_) return nearest_brute(points_, query);
  if (!is_finite(query)) throw InputError("nearest neighbour query is not finite");

  std::array<int, 3> center{};
  for (int d = 0; d < 3; ++d) {
    center[d] = std::clamp(static_cast<int>(std::floor((query[d] - origin_[d]) / cell_size_)), 0, cells_[d] - 1);
  }

  NearestHit best{0, std::numeric_limits<double>::infinity()};
  const int max_ring = std::max({cells_[0], cells_[1], cells_[2]});
  for (int ring = 0; ring <= max_ring; ++ring) {
    std::array<int, 3> lo{}, hi{};
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::max(center[d] - ring, 0);
      hi[d] = std::min(center[d] + ring, cells_[d] - 1);
    }
    for (int z = lo[2]; z <= hi[2]; ++z) {
      for (int y = lo[1]; y <= hi[1]; ++y) {
        for (int x = lo[0]; x <= hi[0]; ++x) {
          const int cheb = std::max({std::abs(x - center[0]), std::abs(y - center[1]), std::abs(z - center[2])});
          if (cheb != ring) continue;
          const std::size_t cell = cell_of({x, y, z});
          for (std::uint32_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
            const std::uint32_t i = order_[k];
            const double d2 = norm2(points_[i] - query);
            if (d2 < best.distance2 || (d2 == best.distance2 && i < best.index)) best = {i, d2};
          }
        }
      }
    }

    // Every point not yet visited lies outside the searched block; stop once
    // the block boundary is strictly farther than the best candidate.
    double bound = std::numeric_limits<double>::infinity();
    bool covers_all = true;
    for (int d = 0; d < 3; ++d) {
      if (center[d] - ring > 0) {
        covers_all = false;
        bound = std::min(bound, query[d] - (origin_[d] + (center[d] - ring) * cell_size_));
      }
      if (center[d] + ring < cells_[d] - 1) {
        covers_all = false;
        bound = std::min(bound, origin_[d] + (center[d] + ring + 1) * cell_size_ - query[d]);
      }
    }
    if (covers_all) break;
    bound -= 1e-9 * cell_size_;  // cell assignment rounds (p - origin) / cell_size
    if (bound > 0.0 && best.distance2 < bound * bound) break;
  }
  return best;
}

}  // namespace ctaflow
