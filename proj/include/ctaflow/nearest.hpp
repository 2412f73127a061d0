#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ctaflow/vec3.hpp"

namespace ctaflow {

struct NearestHit {
  std::uint32_t index = 0;
  double distance2 = 0.0;
};

/// Exhaustive nearest neighbour; ties resolve to the lowest index.
NearestHit nearest_brute(std::span<const Vec3> points, const Vec3& query);

/// Nearest-neighbour queries over a fixed point set. Uses a uniform grid hash
/// with ring-by-ring search; below `kBruteForceLimit` points it scans
/// linearly. Results (index and squared distance) are identical to
/// nearest_brute for every query.
class PointIndex {
 public:
  static constexpr std::size_t kBruteForceLimit = 1024;

  /// `points` must outlive the index.
  explicit PointIndex(std::span<const Vec3> points);

  NearestHit nearest(const Vec3& query) const;
  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::size_t cell_of(const std::array<int, 3>& c) const {
    return static_cast<std::size_t>(c[0]) +
           static_cast<std::size_t>(cells_[0]) * (static_cast<std::size_t>(c[1]) + static_cast<std::size_t>(cells_[1]) * c[2]);
  }

  std::span<const Vec3> points_;
  bool brute_ = true;
  Vec3 origin_{};
  double cell_size_ = 1.0;
  std::array<int, 3> cells_{1, 1, 1};
  std::vector<std::uint32_t> cell_start_;
  std::vector<std::uint32_t> order_;
};

}  // namespace ctaflow
