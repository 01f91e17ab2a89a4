#include "ffdgan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ffdgan/errors.hpp"
#include "ffdgan/kernels.hpp"

namespace ffdgan::geom {

double squared_norm(const Point3& p) { return p.x * p.x + p.y * p.y + p.z * p.z; }

SurfaceGrid::SurfaceGrid(std::size_t sections, std::size_t points_per_section)
    : sections_(sections),
      per_section_(points_per_section),
      points_(sections * points_per_section) {}

SurfaceGrid::SurfaceGrid(std::size_t sections, std::size_t points_per_section,
                         std::vector<Point3> points)
    : sections_(sections), per_section_(points_per_section), points_(std::move(points)) {
  if (points_.size() != sections_ * per_section_) {
    throw ArgumentError("SurfaceGrid: point count " + std::to_string(points_.size()) +
                        " does not match " + std::to_string(sections_) + "x" +
                        std::to_string(per_section_));
  }
}

void SurfaceGrid::validate() const {
  if (sections_ < 2 || per_section_ < 4) {
    throw ArgumentError("SurfaceGrid: need at least 2 sections of 4 points");
  }
  for (const auto& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw NumericError("SurfaceGrid: non-finite coordinate");
    }
  }
  double prev = -INFINITY;
  for (std::size_t s = 0; s < sections_; ++s) {
    double y = 0.0;
    for (const auto& p : section(s)) y += p.y;
    y /= static_cast<double>(per_section_);
    if (y < prev - 1e-12) throw ArgumentError("SurfaceGrid: section y decreases along span");
    prev = y;
  }
}

BoundingBox BoundingBox::of(std::span<const Point3> points) {
  if (points.empty()) throw ArgumentError("BoundingBox::of: empty point set");
  BoundingBox box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y), std::min(box.min.z, p.z)};
    box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y), std::max(box.max.z, p.z)};
  }
  return box;
}

BoundingBox BoundingBox::inflated(double fraction) const {
  const Point3 pad = fraction * extent();
  return {min - pad, max + pad};
}

double bernstein(int i, int degree, double u) {
  if (degree < 0 || i < 0 || i > degree) {
    throw ArgumentError("bernstein: index " + std::to_string(i) + " outside [0, " +
                        std::to_string(degree) + "]");
  }
  if (!(u >= 0.0 && u <= 1.0)) throw ArgumentError("bernstein: u outside [0, 1]");
  double binom = 1.0;
  for (int r = 1; r <= i; ++r) binom = binom * (degree - i + r) / r;
  return binom * std::pow(u, i) * std::pow(1.0 - u, degree - i);
}

ControlLattice base_lattice(const BoundingBox& box, int l, int m, int n) {
  if (l < 1 || m < 1 || n < 1) throw ArgumentError("base_lattice: degrees must be >= 1");
  const Point3 ext = box.extent();
  if (!(ext.x > 0.0) || !(ext.y > 0.0) || !(ext.z > 0.0)) {
    throw ArgumentError("base_lattice: bounding box is degenerate along an axis");
  }
  ControlLattice lattice{{l, m, n}, {}, box};
  lattice.points.resize(lattice.dims.count());
  for (int i = 0; i <= l; ++i) {
    for (int j = 0; j <= m; ++j) {
      for (int k = 0; k <= n; ++k) {
        lattice.points[lattice.dims.index(i, j, k)] = {
            box.min.x + static_cast<double>(i) / l * (box.max.x - box.min.x),
            box.min.y + static_cast<double>(j) / m * (box.max.y - box.min.y),
            box.min.z + static_cast<double>(k) / n * (box.max.z - box.min.z)};
      }
    }
  }
  return lattice;
}

namespace {

double unit_coord(double value, double lo, double hi, const char* axis) {
  const double extent = hi - lo;
  const double tol = 1e-9 * extent;
  if (value < lo - tol || value > hi + tol) {
    throw DomainError(std::string("param_coords: point outside bounding box along ") + axis);
  }
  return std::clamp((value - lo) / extent, 0.0, 1.0);
}

std::vector<double> bernstein_row(int degree, double u) {
  std::vector<double> row(static_cast<std::size_t>(degree) + 1);
  for (int i = 0; i <= degree; ++i) row[static_cast<std::size_t>(i)] = bernstein(i, degree, u);
  return row;
}

}  // namespace

ParamCoords param_coords(const SurfaceGrid& base, const BoundingBox& box) {
  ParamCoords coords;
  coords.sections = base.sections();
  coords.points_per_section = base.points_per_section();
  coords.u.reserve(base.size());
  coords.v.reserve(base.size());
  coords.w.reserve(base.size());
  for (const auto& p : base.points()) {
    coords.u.push_back(unit_coord(p.x, box.min.x, box.max.x, "x"));
    coords.v.push_back(unit_coord(p.y, box.min.y, box.max.y, "y"));
    coords.w.push_back(unit_coord(p.z, box.min.z, box.max.z, "z"));
  }
  return coords;
}

std::vector<double> ffd_weights(const LatticeDims& dims, const ParamCoords& coords,
                                std::span<const std::size_t> rows) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(coords.size());
    for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
    rows = all;
  }
  const std::size_t cols = dims.count();
  std::vector<double> weights(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t p = rows[r];
    if (p >= coords.size()) throw ArgumentError("ffd_weights: row index out of range");
    const auto bu = bernstein_row(dims.l, coords.u[p]);
    const auto bv = bernstein_row(dims.m, coords.v[p]);
    const auto bw = bernstein_row(dims.n, coords.w[p]);
    double* out = weights.data() + r * cols;
    for (int i = 0; i <= dims.l; ++i) {
      for (int j = 0; j <= dims.m; ++j) {
        const double bij = bu[static_cast<std::size_t>(i)] * bv[static_cast<std::size_t>(j)];
        for (int k = 0; k <= dims.n; ++k) {
          out[dims.index(i, j, k)] = bij * bw[static_cast<std::size_t>(k)];
        }
      }
    }
  }
  return weights;
}

SurfaceGrid ffd_deform(const ControlLattice& base, std::span<const Point3> delta,
                       const ParamCoords& coords) {
  const std::size_t count = base.dims.count();
  if (base.points.size() != count || delta.size() != count) {
    throw ArgumentError("ffd_deform: offsets do not match the lattice shape");
  }
  if (coords.v.size() != coords.size() || coords.w.size() != coords.size() ||
      coords.size() != coords.sections * coords.points_per_section) {
    throw ArgumentError("ffd_deform: inconsistent parametric coordinates");
  }
  std::vector<double> control(count * 3);
  for (std::size_t c = 0; c < count; ++c) {
    const Point3 p = base.points[c] + delta[c];
    control[3 * c] = p.x;
    control[3 * c + 1] = p.y;
    control[3 * c + 2] = p.z;
  }
  const auto weights = ffd_weights(base.dims, coords);
  std::vector<double> out(coords.size() * 3);
  kernels::gemm(weights, control, out, coords.size(), count, 3);
  std::vector<Point3> pts(coords.size());
  for (std::size_t p = 0; p < pts.size(); ++p) pts[p] = {out[3 * p], out[3 * p + 1], out[3 * p + 2]};
  return SurfaceGrid(coords.sections, coords.points_per_section, std::move(pts));
}

namespace {

struct SoaBuffer {
  std::vector<double> x, y, z;
  explicit SoaBuffer(std::span<const Point3> pts) {
    x.reserve(pts.size());
    y.reserve(pts.size());
    z.reserve(pts.size());
    for (const auto& p : pts) {
      x.push_back(p.x);
      y.push_back(p.y);
      z.push_back(p.z);
    }
  }
  kernels::PointsSoA view() const { return {x, y, z}; }
};

}  // namespace

double hausdorff(std::span<const Point3> a, std::span<const Point3> b) {
  if (a.empty() || b.empty()) throw ArgumentError("hausdorff: empty point set");
  const SoaBuffer sa(a), sb(b);
  const double ab = kernels::directed_max_min_sq(sa.view(), sb.view());
  const double ba = kernels::directed_max_min_sq(sb.view(), sa.view());
  return std::sqrt(std::max(ab, ba));
}

double hausdorff(const SurfaceGrid& a, const SurfaceGrid& b) {
  return hausdorff(a.points(), b.points());
}

double mse_fit_error(const SurfaceGrid& a, const SurfaceGrid& b) {
  if (a.sections() != b.sections() || a.points_per_section() != b.points_per_section()) {
    throw ArgumentError("mse_fit_error: grid sizes differ");
  }
  if (a.size() == 0) throw ArgumentError("mse_fit_error: empty grid");
  double sum = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) sum += squared_norm(a.points()[p] - b.points()[p]);
  return sum / static_cast<double>(a.size());
}

namespace {

template <typename Pt>
std::size_t leading_edge_impl(std::span<const Pt> section) {
  if (section.size() < 3) throw GeometryError("leading_edge_index: section too short");
  const double tx = section[0].x, tz = section[0].z;
  std::size_t le = 0;
  for (std::size_t i = 1; i < section.size(); ++i) {
    if (section[i].x < section[le].x) le = i;
  }
  for (int iter = 0; iter < 32; ++iter) {
    double dx = tx - section[le].x, dz = tz - section[le].z;
    const double len = std::hypot(dx, dz);
    if (!(len > 0.0)) throw GeometryError("leading_edge_index: zero-chord section");
    dx /= len;
    dz /= len;
    std::size_t next = le;
    double best = 0.0;
    for (std::size_t i = 0; i < section.size(); ++i) {
      const double along = (section[i].x - tx) * dx + (section[i].z - tz) * dz;
      if (along < best) {
        best = along;
        next = i;
      }
    }
    if (next == le) break;
    le = next;
  }
  return le;
}

}  // namespace

std::size_t leading_edge_index(std::span<const Point3> section) {
  return leading_edge_impl(section);
}

std::size_t leading_edge_index(std::span<const Point2> section) {
  return leading_edge_impl(section);
}

SurfaceGrid align(const SurfaceGrid& grid) {
  if (grid.sections() < 1 || grid.points_per_section() < 3) {
    throw ArgumentError("align: grid too small");
  }
  const auto root = grid.section(0);
  const Point3 te = root[0];
  const Point3 le = root[leading_edge_index(root)];
  const double cx = te.x - le.x, cz = te.z - le.z;
  const double chord = std::hypot(cx, cz);
  if (!(chord > 1e-12)) throw GeometryError("align: zero-chord first section");
  const double cos_a = cx / chord, sin_a = cz / chord;

  double ymin = INFINITY, ymax = -INFINITY;
  for (const auto& p : grid.points()) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double span = ymax - ymin;
  if (!(span > 0.0)) throw GeometryError("align: wing has zero span");

  SurfaceGrid out = grid;
  for (auto& p : out.points()) {
    const double dx = p.x - le.x, dz = p.z - le.z;
    p = {cos_a * dx + sin_a * dz, (p.y - le.y) / span, -sin_a * dx + cos_a * dz};
  }
  return out;
}

SurfaceGrid mean_shape(std::span<const SurfaceGrid> grids) {
  if (grids.empty()) throw ArgumentError("mean_shape: empty list");
  const auto& first = grids.front();
  SurfaceGrid out(first.sections(), first.points_per_section());
  for (const auto& g : grids) {
    if (g.sections() != first.sections() || g.points_per_section() != first.points_per_section()) {
      throw ArgumentError("mean_shape: grid sizes differ");
    }
    for (std::size_t p = 0; p < g.size(); ++p) out.points()[p] += g.points()[p];
  }
  const double inv = 1.0 / static_cast<double>(grids.size());
  for (auto& p : out.points()) p = inv * p;
  return out;
}

double signed_area(std::span<const Point2> polygon) {
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = polygon[i];
    const auto& b = polygon[(i + 1) % n];
    twice += a.x * b.z - b.x * a.z;
  }
  return 0.5 * twice;
}

namespace {

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.z - a.z) - (b.z - a.z) * (c.x - a.x);
}

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.z, b.z) <= p.z &&
         p.z <= std::max(a.z, b.z);
}

bool segments_touch(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
  const double d1 = orient(q1, q2, p1);
  const double d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1);
  const double d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

}  // namespace

bool polygon_self_intersects(std::span<const Point2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 4) return false;
  struct Edge {
    double lo, hi;
    std::size_t index;
  };
  std::vector<Edge> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = polygon[i];
    const auto& b = polygon[(i + 1) % n];
    edges[i] = {std::min(a.x, b.x), std::max(a.x, b.x), i};
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.index < b.index);
  });
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t i = edges[e].index;
    const Point2& p1 = polygon[i];
    const Point2& p2 = polygon[(i + 1) % n];
    for (std::size_t f = e + 1; f < n && edges[f].lo <= edges[e].hi; ++f) {
      const std::size_t j = edges[f].index;
      const std::size_t gap = i > j ? i - j : j - i;
      if (gap == 1 || gap == n - 1) continue;
      if (segments_touch(p1, p2, polygon[j], polygon[(j + 1) % n])) return true;
    }
  }
  return false;
}

std::vector<Point2> section_polygon(const SurfaceGrid& grid, std::size_t s) {
  const auto sec = grid.section(s);
  std::vector<Point2> poly;
  poly.reserve(sec.size());
  for (const auto& p : sec) poly.push_back({p.x, p.z});
  if (poly.size() > 1 && poly.front() == poly.back()) poly.pop_back();
  return poly;
}

bool self_intersection_check(const SurfaceGrid& grid) {
  for (std::size_t s = 0; s < grid.sections(); ++s) {
    const auto poly = section_polygon(grid, s);
    for (const auto& p : poly) {
      if (!std::isfinite(p.x) || !std::isfinite(p.z)) return true;
    }
    if (!(signed_area(poly) > 0.0)) return true;
    if (polygon_self_intersects(poly)) return true;
  }
  return false;
}

}  // namespace ffdgan::geom
