#include "ctaflow/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ctaflow/errors.hpp"
#include "ctaflow/random.hpp"

namespace ctaflow {
namespace {

struct Wave {
  Vec3 direction;
  double phase;
};

std::vector<Wave> band_waves(std::uint64_t seed, std::size_t band, int count) {
  std::mt19937_64 rng(mix_seed(seed, band));
  std::vector<Wave> waves(static_cast<std::size_t>(count));
  for (Wave& w : waves) {
    Vec3 d{standard_normal(rng), standard_normal(rng), standard_normal(rng)};
    w.direction = d / norm(d);
    w.phase = uniform(rng, 0.0, 6.283185307179586);
  }
  return waves;
}

}  // namespace

void ShapeSpec::validate() const {
  if (!(base_radius > 0.0) || !std::isfinite(base_radius)) throw SpecError("base radius must be positive");
  double worst = 0.0;
  for (const Band& b : bands) {
    if (b.waves < 1) throw SpecError("every band needs at least one wave");
    if (!std::isfinite(b.amplitude) || !std::isfinite(b.frequency)) throw SpecError("band values must be finite");
    worst += std::abs(b.amplitude);
  }
  if (worst > 0.5) {
    throw SpecError("bands can displace the surface by " + std::to_string(worst) +
                    " x base radius; the limit is 0.5");
  }
}

ShapeSpec ShapeFamily::spec(double a, std::uint64_t seed) const {
  const double u = std::clamp((a - range.min) / (range.max - range.min), 0.0, 1.0);
  ShapeSpec s;
  s.a = a;
  s.seed = seed;
  s.base_radius = radius_min + (radius_max - radius_min) * u;
  for (std::size_t b = 0; b < high.size(); ++b) {
    Band band = high[b];
    const double start = b < low.size() ? low[b].amplitude : 0.0;
    band.amplitude = start + (high[b].amplitude - start) * u;
    s.bands.push_back(band);
  }
  return s;
}

TriangleMesh make_target(const ShapeSpec& spec, const TriangleMesh& template_mesh) {
  spec.validate();
  std::vector<std::vector<Wave>> waves;
  for (std::size_t b = 0; b < spec.bands.size(); ++b) waves.push_back(band_waves(spec.seed, b, spec.bands[b].waves));

  std::vector<Vec3> out(template_mesh.vertices.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double len = norm(template_mesh.vertices[i]);
    if (!(len > 0.0)) throw SpecError("template vertex " + std::to_string(i) + " sits at the origin");
    const Vec3 d = template_mesh.vertices[i] / len;
    double scale = 1.0;
    for (std::size_t b = 0; b < spec.bands.size(); ++b) {
      const Band& band = spec.bands[b];
      double f = 0.0;
      for (const Wave& w : waves[b]) f += std::sin(band.frequency * dot(w.direction, d) + w.phase);
      scale += band.amplitude * f / static_cast<double>(waves[b].size());
    }
    out[i] = d * (spec.base_radius * scale);
  }
  TriangleMesh target = template_mesh.with_vertices(std::move(out));
  target.correspondence = true;
  return target;
}

TriangleMesh make_outer_target(const TriangleMesh& inner, double thickness) {
  if (!(thickness >= 0.0)) throw SpecError("outer surface thickness must be non-negative");
  std::vector<Vec3> out(inner.vertices.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double len = norm(inner.vertices[i]);
    if (!(len > 0.0)) throw SpecError("inner vertex " + std::to_string(i) + " sits at the origin");
    out[i] = inner.vertices[i] * ((len + thickness) / len);
  }
  TriangleMesh outer = inner.with_vertices(std::move(out));
  outer.correspondence = true;
  return outer;
}

std::vector<DatasetItem> make_dataset(std::size_t n, double a_min, double a_max, std::uint64_t seed,
                                      const TriangleMesh& template_mesh, const ShapeFamily& family) {
  if (n == 0) throw SpecError("dataset needs at least one item");
  if (!(a_min <= a_max)) throw SpecError("condition range must satisfy min <= max");
  std::vector<DatasetItem> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = n == 1 ? a_min : a_min + (a_max - a_min) * static_cast<double>(i) / static_cast<double>(n - 1);
    items.push_back({a, seed, make_target(family.spec(a, seed), template_mesh)});
  }
  return items;
}

TriangleMesh make_template(int subdivisions, double radius, int smooth_iterations, double smooth_factor) {
  TriangleMesh sphere = make_icosphere(subdivisions, radius);
  TriangleMesh smoothed = laplacian_smooth(sphere, smooth_iterations, smooth_factor);
  smoothed.correspondence = true;
  return smoothed;
}

}  // namespace ctaflow
