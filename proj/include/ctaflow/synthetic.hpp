#pragma once

#include <cstdint>
#include <vector>

#include "ctaflow/attention.hpp"
#include "ctaflow/mesh.hpp"

namespace ctaflow {

/// One frequency band of radial displacement. `amplitude` is relative to the base radius.
struct Band {
  double frequency = 1.0;
  double amplitude = 0.0;
  int waves = 4;  ///< sinusoids summed (and averaged) within the band
};

/// Condition-parameterized star-shaped target surface.
struct ShapeSpec {
  double a = 27.0;
  double base_radius = 0.5;
  std::vector<Band> bands;
  std::uint64_t seed = 0;

  /// Throws SpecError unless the worst-case radial displacement stays within base_radius / 2.
  void validate() const;
};

/// Family defaults: base radius and every band amplitude grow with the
/// condition, and the higher bands only switch on for larger values.
struct ShapeFamily {
  ConditionRange range{};
  double radius_min = 0.45;
  double radius_max = 0.70;
  std::vector<Band> low{{2.0, 0.06, 4}};          // amplitude at range.min
  std::vector<Band> high{{2.0, 0.12, 4}, {5.0, 0.05, 5}, {9.0, 0.03, 6}};  // amplitude at range.max

  ShapeSpec spec(double a, std::uint64_t seed) const;
};

/// Radially displaces every template vertex: x -> d * base_radius * (1 + sum_b amp_b * f_b(d))
/// with d = x/|x| and f_b an average of sinusoids of fixed random directions.
/// Connectivity is shared with the template and the correspondence flag is set.
TriangleMesh make_target(const ShapeSpec& spec, const TriangleMesh& template_mesh);

/// Moves every vertex radially outward by `thickness`; the result is in correspondence with `inner`.
TriangleMesh make_outer_target(const TriangleMesh& inner, double thickness);

struct DatasetItem {
  double a = 0.0;
  std::uint64_t seed = 0;
  TriangleMesh mesh;
};

/// `n` targets with conditions evenly spaced over [a_min, a_max]. Every item
/// shares `seed`, so the fold pattern is common and only its scale changes with a.
std::vector<DatasetItem> make_dataset(std::size_t n, double a_min, double a_max, std::uint64_t seed,
                                      const TriangleMesh& template_mesh, const ShapeFamily& family = {});

/// Icosphere followed by Laplacian smoothing.
TriangleMesh make_template(int subdivisions, double radius, int smooth_iterations, double smooth_factor);

}  // namespace ctaflow
