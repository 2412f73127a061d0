#include "ctaflow/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ctaflow/errors.hpp"
#include "ctaflow/nearest.hpp"

namespace ctaflow {
namespace {

std::vector<double> directed(const std::vector<Vec3>& from, const std::vector<Vec3>& to, int workers) {
  const PointIndex index(to);
  std::vector<double> out(from.size());
  const auto n = static_cast<std::ptrdiff_t>(from.size());
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = std::sqrt(index.nearest(from[i]).distance2);
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// --- triangle intersection -------------------------------------------------

struct Box {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};

  void grow(const Vec3& p) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  void grow(const Box& b) {
    grow(b.lo);
    grow(b.hi);
  }
  bool overlaps(const Box& b, double pad) const {
    for (int d = 0; d < 3; ++d) {
      if (lo[d] > b.hi[d] + pad || b.lo[d] > hi[d] + pad) return false;
    }
    return true;
  }
};

int sign_of(double d, double eps) { return d > eps ? 1 : (d < -eps ? -1 : 0); }

// Interval of triangle t on the line through `origin` with direction `dir`,
// given signed distances `d` of its corners to the other triangle's plane.
// Requires t to straddle that plane strictly.
std::array<double, 2> line_interval(const std::array<Vec3, 3>& t, const std::array<double, 3>& d,
                                    const std::array<int, 3>& s, const Vec3& dir) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto add = [&](const Vec3& p) {
    const double u = dot(p, dir);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  };
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    if (s[i] == 0) add(t[i]);
    if (s[i] * s[j] < 0) add(t[i] + (t[j] - t[i]) * (d[i] / (d[i] - d[j])));
  }
  return {lo, hi};
}

double orient2(const std::array<double, 2>& a, const std::array<double, 2>& b, const std::array<double, 2>& c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

bool coplanar_overlap(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2, const Vec3& n, double eps) {
  // Drop the dominant normal axis.
  int drop = 0;
  if (std::abs(n.y) > std::abs(n[drop])) drop = 1;
  if (std::abs(n.z) > std::abs(n[drop])) drop = 2;
  const int u = (drop + 1) % 3;
  const int v = (drop + 2) % 3;
  std::array<std::array<double, 2>, 3> a{}, b{};
  for (int i = 0; i < 3; ++i) {
    a[i] = {t1[i][u], t1[i][v]};
    b[i] = {t2[i][u], t2[i][v]};
  }
  auto strictly_inside = [eps](const std::array<double, 2>& p, const std::array<std::array<double, 2>, 3>& tri) {
    const double area = orient2(tri[0], tri[1], tri[2]);
    const double s = area > 0 ? 1.0 : -1.0;
    for (int i = 0; i < 3; ++i) {
      const auto& e0 = tri[i];
      const auto& e1 = tri[(i + 1) % 3];
      const double len = std::hypot(e1[0] - e0[0], e1[1] - e0[1]);
      if (s * orient2(e0, e1, p) <= eps * len) return false;
    }
    return true;
  };
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const auto& p0 = a[i];
      const auto& p1 = a[(i + 1) % 3];
      const auto& q0 = b[j];
      const auto& q1 = b[(j + 1) % 3];
      const double lp = std::hypot(p1[0] - p0[0], p1[1] - p0[1]);
      const double lq = std::hypot(q1[0] - q0[0], q1[1] - q0[1]);
      const double o1 = orient2(p0, p1, q0) / lp;
      const double o2 = orient2(p0, p1, q1) / lp;
      const double o3 = orient2(q0, q1, p0) / lq;
      const double o4 = orient2(q0, q1, p1) / lq;
      if (sign_of(o1, eps) * sign_of(o2, eps) < 0 && sign_of(o3, eps) * sign_of(o4, eps) < 0) return true;
    }
  }
  for (int i = 0; i < 3; ++i) {
    if (strictly_inside(a[i], b) || strictly_inside(b[i], a)) return true;
  }
  // Identical triangles: no vertex strictly inside, no proper edge crossing.
  const std::array<double, 2> ca{(a[0][0] + a[1][0] + a[2][0]) / 3.0, (a[0][1] + a[1][1] + a[2][1]) / 3.0};
  return strictly_inside(ca, b);
}

Box face_box(const TriangleMesh& mesh, std::size_t f) {
  Box b;
  for (std::uint32_t v : mesh.faces[f]) b.grow(mesh.vertices[v]);
  return b;
}

bool share_vertex(const Face& a, const Face& b) {
  for (std::uint32_t x : a) {
    if (x == b[0] || x == b[1] || x == b[2]) return true;
  }
  return false;
}

std::array<Vec3, 3> corners(const TriangleMesh& mesh, std::size_t f) {
  const Face& face = mesh.faces[f];
  return {mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]};
}

// --- BVH ---------------------------------------------------------------------

struct BvhNode {
  Box box;
  std::uint32_t left = 0;   // child index, or first item for leaves
  std::uint32_t right = 0;  // child index, or item count for leaves
  bool leaf = false;
};

class FaceBvh {
 public:
  FaceBvh(std::vector<Box> boxes, std::vector<std::uint32_t> items) : boxes_(std::move(boxes)), items_(std::move(items)) {
    if (!items_.empty()) build(0, static_cast<std::uint32_t>(items_.size()));
  }

  template <typename Visit>
  void query(const Box& box, double pad, Visit&& visit) const {
    if (nodes_.empty()) return;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
      const BvhNode& node = nodes_[stack.back()];
      stack.pop_back();
      if (!node.box.overlaps(box, pad)) continue;
      if (node.leaf) {
        for (std::uint32_t k = node.left; k < node.left + node.right; ++k) visit(items_[k]);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }

 private:
  static constexpr std::uint32_t kLeafSize = 4;

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Box bounds, centroids;
    for (std::uint32_t k = begin; k < end; ++k) {
      const Box& b = boxes_[items_[k]];
      bounds.grow(b);
      centroids.grow((b.lo + b.hi) * 0.5);
    }
    nodes_[id].box = bounds;
    if (end - begin <= kLeafSize) {
      nodes_[id].leaf = true;
      nodes_[id].left = begin;
      nodes_[id].right = end - begin;
      return id;
    }
    int axis = 0;
    const Vec3 extent = centroids.hi - centroids.lo;
    if (extent.y > extent[axis]) axis = 1;
    if (extent.z > extent[axis]) axis = 2;
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(items_.begin() + begin, items_.begin() + mid, items_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = boxes_[a].lo[axis] + boxes_[a].hi[axis];
                       const double cb = boxes_[b].lo[axis] + boxes_[b].hi[axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  std::vector<Box> boxes_;
  std::vector<std::uint32_t> items_;
  std::vector<BvhNode> nodes_;
};

}  // namespace

SurfaceDistances surface_distances(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed_a,
                                   std::uint64_t seed_b, int workers) {
  const PointCloud pa = sample_surface(a, n, seed_a);
  const PointCloud pb = sample_surface(b, n, seed_b);
  workers = std::max(workers, 1);
  return {directed(pa.points, pb.points, workers), directed(pb.points, pa.points, workers)};
}

double assd(const SurfaceDistances& d) { return 0.5 * (mean(d.a_to_b) + mean(d.b_to_a)); }

double assd(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed) {
  return assd(a, b, n, seed, seed);
}

double assd(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed_a, std::uint64_t seed_b) {
  return assd(surface_distances(a, b, n, seed_a, seed_b));
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double hd90(const SurfaceDistances& d) {
  std::vector<double> pooled = d.a_to_b;
  pooled.insert(pooled.end(), d.b_to_a.begin(), d.b_to_a.end());
  return quantile_linear(std::move(pooled), 0.9);
}

double hd90(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed) {
  return hd90(surface_distances(a, b, n, seed, seed));
}

bool triangles_intersect(const std::array<Vec3, 3>& t1, const std::array<Vec3, 3>& t2, double eps) {
  const Vec3 c1 = cross(t1[1] - t1[0], t1[2] - t1[0]);
  const Vec3 c2 = cross(t2[1] - t2[0], t2[2] - t2[0]);
  const double l1 = norm(c1);
  const double l2 = norm(c2);
  if (l1 == 0.0 || l2 == 0.0) return false;
  const Vec3 n1 = c1 / l1;
  const Vec3 n2 = c2 / l2;

  std::array<double, 3> d1{}, d2{};  // t1 against plane 2, t2 against plane 1
  std::array<int, 3> s1{}, s2{};
  for (int i = 0; i < 3; ++i) {
    d1[i] = dot(n2, t1[i] - t2[0]);
    d2[i] = dot(n1, t2[i] - t1[0]);
    s1[i] = sign_of(d1[i], eps);
    s2[i] = sign_of(d2[i], eps);
  }
  const bool coplanar = s1[0] == 0 && s1[1] == 0 && s1[2] == 0 && s2[0] == 0 && s2[1] == 0 && s2[2] == 0;
  if (coplanar) return coplanar_overlap(t1, t2, n1, eps);

  // Both triangles must straddle the other's plane; otherwise they at most touch.
  auto one_side = [](const std::array<int, 3>& s) {
    return (s[0] >= 0 && s[1] >= 0 && s[2] >= 0) || (s[0] <= 0 && s[1] <= 0 && s[2] <= 0);
  };
  if (one_side(s1) || one_side(s2)) return false;

  // Both intervals lie on the line shared by the two planes; the triangles
  // intersect properly when the intervals overlap by more than eps.
  const Vec3 line = cross(n1, n2);
  const double len = norm(line);
  if (len == 0.0) return false;
  const Vec3 dir = line / len;
  const auto i1 = line_interval(t1, d1, s1, dir);
  const auto i2 = line_interval(t2, d2, s2, dir);
  return std::min(i1[1], i2[1]) - std::max(i1[0], i2[0]) > eps;
}

std::string_view to_string(SifBackend backend) { return backend == SifBackend::kBrute ? "brute" : "bvh"; }

SifBackend parse_sif_backend(std::string_view name) {
  if (name == "brute") return SifBackend::kBrute;
  if (name == "bvh") return SifBackend::kBvh;
  throw InputError("unknown SIF backend '" + std::string(name) + "' (expected brute or bvh)");
}

SifResult sif_ratio(const TriangleMesh& mesh, SifBackend backend, int workers) {
  mesh.validate();
  const std::size_t nf = mesh.faces.size();
  SifResult result;
  if (nf == 0) return result;
  workers = std::max(workers, 1);

  const FaceNormals normals = face_normals(mesh);
  std::vector<std::uint32_t> live;
  for (std::size_t f = 0; f < nf; ++f) {
    if (normals.degenerate[f]) result.degenerate.push_back(static_cast<std::uint32_t>(f));
    else live.push_back(static_cast<std::uint32_t>(f));
  }

  std::vector<std::uint8_t> hit(nf, 0);
  auto test = [&](std::uint32_t f, std::uint32_t g) {
    return !share_vertex(mesh.faces[f], mesh.faces[g]) && triangles_intersect(corners(mesh, f), corners(mesh, g));
  };
  const auto count = static_cast<std::ptrdiff_t>(live.size());

  if (backend == SifBackend::kBrute) {
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers) if (workers > 1)
    for (std::ptrdiff_t a = 0; a < count; ++a) {
      const std::uint32_t f = live[a];
      for (std::ptrdiff_t b = 0; b < count; ++b) {
        if (a != b && test(f, live[b])) {
          hit[f] = 1;
          break;
        }
      }
    }
  } else {
    std::vector<Box> boxes(nf);
    for (std::uint32_t f : live) boxes[f] = face_box(mesh, f);
    const FaceBvh bvh(boxes, live);
#pragma omp parallel for schedule(dynamic, 64) num_threads(workers) if (workers > 1)
    for (std::ptrdiff_t a = 0; a < count; ++a) {
      const std::uint32_t f = live[a];
      bool found = false;
      bvh.query(boxes[f], kIntersectionTolerance, [&](std::uint32_t g) {
        if (!found && g != f && test(f, g)) found = true;
      });
      if (found) hit[f] = 1;
    }
  }

  for (std::size_t f = 0; f < nf; ++f) {
    if (hit[f]) result.faces.push_back(static_cast<std::uint32_t>(f));
  }
  result.percent = 100.0 * static_cast<double>(result.faces.size()) / static_cast<double>(nf);
  return result;
}

MetricsReport evaluate(const TriangleMesh& pred, const TriangleMesh& target, const MetricsOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  MetricsReport report;
  const SurfaceDistances d = surface_distances(pred, target, options.samples, options.seed, options.seed, options.workers);
  report.assd = assd(d);
  report.hd90 = hd90(d);
  const SifResult sif = sif_ratio(pred, options.backend, options.workers);
  report.sif_percent = sif.percent;
  report.sif_faces = sif.faces;
  report.euler_characteristic = euler_characteristic(pred);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace ctaflow
