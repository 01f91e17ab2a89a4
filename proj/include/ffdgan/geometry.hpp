#pragma once

// Surface grids, FFD lattices, and the shape metrics shared by every other
// module. All functions are pure and reentrant.

#include <cstddef>
#include <span>
#include <vector>

namespace ffdgan::geom {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3& operator+=(const Point3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  friend Point3 operator+(Point3 a, const Point3& b) { return a += b; }
  friend Point3 operator-(const Point3& a, const Point3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Point3 operator*(double s, const Point3& p) { return {s * p.x, s * p.y, s * p.z}; }
  friend bool operator==(const Point3&, const Point3&) = default;
};

double squared_norm(const Point3& p);

// Chordwise-section point in the x-z plane.
struct Point2 {
  double x = 0.0;
  double z = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// M sections along the span, N points per section, stored row-major.
class SurfaceGrid {
 public:
  SurfaceGrid() = default;
  SurfaceGrid(std::size_t sections, std::size_t points_per_section);
  SurfaceGrid(std::size_t sections, std::size_t points_per_section, std::vector<Point3> points);

  std::size_t sections() const { return sections_; }
  std::size_t points_per_section() const { return per_section_; }
  std::size_t size() const { return points_.size(); }

  Point3& at(std::size_t s, std::size_t t) { return points_[s * per_section_ + t]; }
  const Point3& at(std::size_t s, std::size_t t) const { return points_[s * per_section_ + t]; }

  std::span<Point3> points() { return points_; }
  std::span<const Point3> points() const { return points_; }
  std::span<const Point3> section(std::size_t s) const {
    return std::span<const Point3>(points_).subspan(s * per_section_, per_section_);
  }

  // Checks M >= 2, N >= 4, finite coordinates, and non-decreasing section y.
  void validate() const;

  friend bool operator==(const SurfaceGrid&, const SurfaceGrid&) = default;

 private:
  std::size_t sections_ = 0;
  std::size_t per_section_ = 0;
  std::vector<Point3> points_;
};

struct BoundingBox {
  Point3 min;
  Point3 max;

  static BoundingBox of(std::span<const Point3> points);
  // Grows each side by `fraction` of the extent along that axis.
  BoundingBox inflated(double fraction) const;
  Point3 extent() const { return max - min; }
};

struct LatticeDims {
  int l = 1;  // degree along x (l + 1 control points)
  int m = 1;  // degree along y
  int n = 1;  // degree along z

  std::size_t count() const {
    return static_cast<std::size_t>(l + 1) * static_cast<std::size_t>(m + 1) *
           static_cast<std::size_t>(n + 1);
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(m + 1) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(n + 1) +
           static_cast<std::size_t>(k);
  }
  friend bool operator==(const LatticeDims&, const LatticeDims&) = default;
};

struct ControlLattice {
  LatticeDims dims;
  std::vector<Point3> points;  // indexed by dims.index(i, j, k)
  BoundingBox box;
};

// Per-point lattice coordinates in [0, 1]^3, row-major like the grid.
struct ParamCoords {
  std::size_t sections = 0;
  std::size_t points_per_section = 0;
  std::vector<double> u, v, w;
  std::size_t size() const { return u.size(); }
};

double bernstein(int i, int degree, double u);

ControlLattice base_lattice(const BoundingBox& box, int l, int m, int n);

ParamCoords param_coords(const SurfaceGrid& base, const BoundingBox& box);

// Row-major (points x lattice points) matrix of trivariate Bernstein products.
// `rows` selects a subset of grid points (flat indices); empty means all.
std::vector<double> ffd_weights(const LatticeDims& dims, const ParamCoords& coords,
                                std::span<const std::size_t> rows = {});

// Deforms the embedded surface by control-point offsets `delta`.
SurfaceGrid ffd_deform(const ControlLattice& base, std::span<const Point3> delta,
                       const ParamCoords& coords);

double hausdorff(std::span<const Point3> a, std::span<const Point3> b);
double hausdorff(const SurfaceGrid& a, const SurfaceGrid& b);

double mse_fit_error(const SurfaceGrid& a, const SurfaceGrid& b);

// Index of the leading edge of a closed section whose trailing edge is point 0:
// the point furthest forward along the chord line it defines with the trailing
// edge (a fixed point of "minimum x after de-rotation").
std::size_t leading_edge_index(std::span<const Point3> section);
std::size_t leading_edge_index(std::span<const Point2> section);

SurfaceGrid align(const SurfaceGrid& grid);

SurfaceGrid mean_shape(std::span<const SurfaceGrid> grids);

// Signed shoelace area of a closed polygon (positive when counterclockwise).
double signed_area(std::span<const Point2> polygon);

// True if two non-adjacent edges of the closed polygon touch or cross.
bool polygon_self_intersects(std::span<const Point2> polygon);

std::vector<Point2> section_polygon(const SurfaceGrid& grid, std::size_t s);

bool self_intersection_check(const SurfaceGrid& grid);

}  // namespace ffdgan::geom
