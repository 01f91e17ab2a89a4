#include <cmath>
#include <vector>

#include "doctest.h"
#include "ffdgan/errors.hpp"
#include "ffdgan/geometry.hpp"
#include "test_support.hpp"

using namespace ffdgan;
using namespace ffdgan::geom;

TEST_CASE("bernstein: hand-evaluated values") {
  CHECK(bernstein(0, 3, 0.0) == 1.0);
  CHECK(bernstein(1, 2, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(bernstein(2, 4, 0.3) == doctest::Approx(0.2646).epsilon(1e-13));
  CHECK_THROWS_AS(bernstein(4, 3, 0.5), ArgumentError);
  CHECK_THROWS_AS(bernstein(-1, 3, 0.5), ArgumentError);
  CHECK_THROWS_AS(bernstein(1, 3, 1.5), ArgumentError);
}

TEST_CASE("bernstein: partition of unity and affine precision") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int l = static_cast<int>(rng.uniform_int(1, 10));
    const double u = rng.uniform();
    double sum = 0.0, first_moment = 0.0;
    for (int i = 0; i <= l; ++i) {
      sum += bernstein(i, l, u);
      first_moment += bernstein(i, l, u) * i / l;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(std::abs(first_moment - u) <= 1e-12);
  }
}

TEST_CASE("base_lattice: corners, counts, spacing, degenerate boxes") {
  const BoundingBox unit{{0, 0, 0}, {1, 1, 1}};
  const auto corners = base_lattice(unit, 1, 1, 1);
  REQUIRE(corners.points.size() == 8);
  for (int i = 0; i <= 1; ++i)
    for (int j = 0; j <= 1; ++j)
      for (int k = 0; k <= 1; ++k)
        CHECK(corners.points[corners.dims.index(i, j, k)] == Point3{double(i), double(j), double(k)});

  CHECK(base_lattice(unit, 3, 7, 1).points.size() == 64);
  const auto mid = base_lattice(unit, 2, 1, 1);
  CHECK(mid.points[mid.dims.index(1, 0, 0)].x == 0.5);

  const BoundingBox flat{{0, 0, 0}, {1, 1, 0}};
  CHECK_THROWS_AS(base_lattice(flat, 1, 1, 1), ArgumentError);
  CHECK_THROWS_AS(base_lattice(unit, 0, 1, 1), ArgumentError);
}

TEST_CASE("param_coords: affine map into the unit cube") {
  SurfaceGrid g(1, 3, {{0, 0, 0}, {2, 2, 2}, {1, 0.5, 2}});
  const BoundingBox box{{0, 0, 0}, {2, 2, 2}};
  const auto c = param_coords(g, box);
  CHECK(c.u[0] == 0.0);
  CHECK(c.v[0] == 0.0);
  CHECK(c.w[0] == 0.0);
  CHECK(c.u[1] == 1.0);
  CHECK(c.v[1] == 1.0);
  CHECK(c.w[1] == 1.0);
  CHECK(c.u[2] == 0.5);
  CHECK(c.v[2] == 0.25);
  CHECK(c.w[2] == 1.0);

  SurfaceGrid outside(1, 1, {{2.1, 0, 0}});
  CHECK_THROWS_AS(param_coords(outside, box), DomainError);
  SurfaceGrid barely(1, 1, {{2.0 + 1e-10, 0, 0}});
  CHECK(param_coords(barely, box).u[0] == 1.0);
}

namespace {

struct Embedded {
  SurfaceGrid base;
  ControlLattice lattice;
  ParamCoords coords;
};

Embedded embed(const SurfaceGrid& g, int l, int m, int n) {
  const auto box = BoundingBox::of(g.points()).inflated(0.05);
  return {g, base_lattice(box, l, m, n), param_coords(g, box)};
}

std::vector<Point3> random_offsets(Rng& rng, std::size_t count, double scale) {
  std::vector<Point3> d(count);
  for (auto& p : d) p = {rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
  return d;
}

}  // namespace

TEST_CASE("ffd_deform: zero offsets reproduce the embedded surface") {
  const auto e = embed(testing::simple_wing(21, 51), 3, 7, 1);
  const std::vector<Point3> zero(e.lattice.points.size());
  const auto out = ffd_deform(e.lattice, zero, e.coords);
  CHECK(testing::max_abs_diff(out, e.base) <= 1e-12);
}

TEST_CASE("ffd_deform: constant offset translates every point") {
  const auto e = embed(testing::simple_wing(5, 17), 2, 3, 1);
  const Point3 c{0.1, -0.2, 0.05};
  const std::vector<Point3> shift(e.lattice.points.size(), c);
  const auto out = ffd_deform(e.lattice, shift, e.coords);
  for (std::size_t p = 0; p < out.size(); ++p) {
    const Point3 d = out.points()[p] - e.base.points()[p];
    CHECK(std::abs(d.x - c.x) <= 1e-12);
    CHECK(std::abs(d.y - c.y) <= 1e-12);
    CHECK(std::abs(d.z - c.z) <= 1e-12);
  }
}

TEST_CASE("ffd_deform: matches the literal triple sum on a 2x2x2 lattice") {
  Rng rng(23);
  const auto e = embed(testing::simple_wing(4, 9), 1, 1, 1);
  const auto delta = random_offsets(rng, 8, 0.1);
  const auto out = ffd_deform(e.lattice, delta, e.coords);
  std::vector<Point3> control(8);
  for (std::size_t c = 0; c < 8; ++c) control[c] = e.lattice.points[c] + delta[c];
  for (std::size_t p = 0; p < out.size(); ++p) {
    const auto ref = testing::naive_ffd_point(1, 1, 1, control, e.coords.u[p], e.coords.v[p], e.coords.w[p]);
    CHECK(std::abs(ref.x - out.points()[p].x) <= 1e-12);
    CHECK(std::abs(ref.y - out.points()[p].y) <= 1e-12);
    CHECK(std::abs(ref.z - out.points()[p].z) <= 1e-12);
  }
}

TEST_CASE("ffd_deform: linear in the offsets") {
  Rng rng(29);
  const auto e = embed(testing::simple_wing(6, 21), 3, 7, 1);
  const std::size_t count = e.lattice.points.size();
  const auto d1 = random_offsets(rng, count, 0.1);
  const auto d2 = random_offsets(rng, count, 0.1);
  const double alpha = 0.7, beta = -1.3;
  std::vector<Point3> combo(count);
  for (std::size_t c = 0; c < count; ++c) combo[c] = alpha * d1[c] + beta * d2[c];
  const std::vector<Point3> zero(count);
  const auto base = ffd_deform(e.lattice, zero, e.coords);
  const auto x1 = ffd_deform(e.lattice, d1, e.coords);
  const auto x2 = ffd_deform(e.lattice, d2, e.coords);
  const auto xc = ffd_deform(e.lattice, combo, e.coords);
  for (std::size_t p = 0; p < base.size(); ++p) {
    const Point3 lhs = xc.points()[p] - base.points()[p];
    const Point3 rhs = alpha * (x1.points()[p] - base.points()[p]) + beta * (x2.points()[p] - base.points()[p]);
    CHECK(squared_norm(lhs - rhs) <= 1e-20);
  }
}

TEST_CASE("ffd_deform: offsets of the wrong shape are rejected") {
  const auto e = embed(testing::simple_wing(4, 9), 1, 1, 1);
  const std::vector<Point3> wrong(7);
  CHECK_THROWS_AS(ffd_deform(e.lattice, wrong, e.coords), ArgumentError);
}

TEST_CASE("hausdorff: examples and brute-force agreement") {
  const auto wing = testing::simple_wing(5, 11);
  CHECK(hausdorff(wing, wing) == 0.0);
  const std::vector<Point3> p0{{0, 0, 0}}, p3{{3, 0, 0}};
  CHECK(hausdorff(p0, p3) == 3.0);
  const std::vector<Point3> a{{0, 0, 0}, {1, 0, 0}}, b{{0, 0, 0}, {5, 0, 0}};
  CHECK(hausdorff(a, b) == 4.0);

  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ga = testing::random_grid(rng, 3 + trial, 7);
    const auto gb = testing::random_grid(rng, 4, 5 + trial);
    const auto gc = testing::random_grid(rng, 2, 9);
    const std::vector<Point3> va(ga.points().begin(), ga.points().end());
    const std::vector<Point3> vb(gb.points().begin(), gb.points().end());
    const double dab = hausdorff(ga, gb);
    CHECK(dab == testing::brute_hausdorff(va, vb));
    CHECK(dab == hausdorff(gb, ga));
    CHECK(dab >= 0.0);
    CHECK(dab <= hausdorff(ga, gc) + hausdorff(gc, gb) + 1e-15);
  }
}

TEST_CASE("mse_fit_error: examples") {
  const auto a = testing::simple_wing(4, 9);
  CHECK(mse_fit_error(a, a) == 0.0);
  auto shifted = a;
  for (auto& p : shifted.points()) p += Point3{1, 0, 0};
  CHECK(mse_fit_error(a, shifted) == doctest::Approx(1.0).epsilon(1e-14));
  auto diag = a;
  for (auto& p : diag.points()) p += Point3{0.3, 0.4, 0};
  CHECK(mse_fit_error(a, diag) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK_THROWS_AS(mse_fit_error(a, testing::simple_wing(4, 11)), ArgumentError);
}

namespace {

SurfaceGrid rotate_about_y(const SurfaceGrid& g, double angle) {
  SurfaceGrid out = g;
  for (auto& p : out.points()) {
    p = {std::cos(angle) * p.x + std::sin(angle) * p.z, p.y, -std::sin(angle) * p.x + std::cos(angle) * p.z};
  }
  return out;
}

}  // namespace

TEST_CASE("align: fixed point, de-rotation, span scaling, idempotence") {
  const auto wing = testing::simple_wing(7, 41);
  CHECK(testing::max_abs_diff(align(wing), wing) <= 1e-12);

  const auto rotated = rotate_about_y(wing, 10.0 * M_PI / 180.0);
  const auto restored = align(rotated);
  const auto root = restored.section(0);
  const Point3 te = root[0];
  const Point3 le = root[leading_edge_index(root)];
  const double len = std::hypot(te.x - le.x, te.z - le.z);
  CHECK(std::abs((te.x - le.x) / len - 1.0) <= 1e-9);
  CHECK(std::abs((te.z - le.z) / len) <= 1e-9);
  CHECK(testing::max_abs_diff(restored, wing) <= 1e-9);

  auto stretched = wing;
  for (auto& p : stretched.points()) p.y *= 4.0;
  const auto scaled = align(stretched);
  double ymax = -1, ymin = 1;
  for (const auto& p : scaled.points()) {
    ymax = std::max(ymax, p.y);
    ymin = std::min(ymin, p.y);
  }
  CHECK(ymax - ymin == 1.0);

  Rng rng(37);
  auto messy = rotate_about_y(wing, rng.uniform(-0.3, 0.3));
  for (auto& p : messy.points()) p += Point3{0.3, 2.0, -0.1};
  const auto once = align(messy);
  CHECK(testing::max_abs_diff(align(once), once) <= 1e-9);

  SurfaceGrid degenerate(2, 4);
  CHECK_THROWS_AS(align(degenerate), GeometryError);
}

TEST_CASE("mean_shape: single, symmetric pair, naive mean") {
  const auto wing = testing::simple_wing(3, 9);
  CHECK(mean_shape(std::vector<SurfaceGrid>{wing}) == wing);

  auto plus = wing, minus = wing;
  for (auto& p : plus.points()) p += Point3{0.1, 0.2, 0.3};
  for (auto& p : minus.points()) p += Point3{-0.1, -0.2, -0.3};
  CHECK(testing::max_abs_diff(mean_shape(std::vector<SurfaceGrid>{plus, minus}), wing) <= 1e-15);

  Rng rng(41);
  std::vector<SurfaceGrid> three{testing::random_grid(rng, 3, 5), testing::random_grid(rng, 3, 5),
                                 testing::random_grid(rng, 3, 5)};
  const auto mean = mean_shape(three);
  for (std::size_t p = 0; p < mean.size(); ++p) {
    const double x = (three[0].points()[p].x + three[1].points()[p].x + three[2].points()[p].x) / 3.0;
    CHECK(mean.points()[p].x == doctest::Approx(x).epsilon(1e-14));
  }
  CHECK_THROWS_AS(mean_shape(std::vector<SurfaceGrid>{}), ArgumentError);
  CHECK_THROWS_AS(mean_shape(std::vector<SurfaceGrid>{wing, testing::simple_wing(3, 11)}), ArgumentError);
}

TEST_CASE("self_intersection_check: simple, crossed, and flat sections") {
  auto wing = testing::simple_wing(5, 41);
  CHECK_FALSE(self_intersection_check(wing));

  // Swap upper and lower over the rear part of one section's chord.
  auto crossed = wing;
  const std::size_t n = crossed.points_per_section();
  for (std::size_t t = 3; t < 10; ++t) std::swap(crossed.at(2, t).z, crossed.at(2, n - 1 - t).z);
  CHECK(self_intersection_check(crossed));

  auto flat = wing;
  for (auto& p : flat.points()) p.z = 0.0;
  CHECK(self_intersection_check(flat));

  // Clockwise orientation has negative area.
  auto reversed = wing;
  for (std::size_t s = 0; s < reversed.sections(); ++s)
    for (std::size_t t = 0; t < n; ++t) reversed.at(s, t).z = -wing.at(s, t).z;
  CHECK(self_intersection_check(reversed));
}

TEST_CASE("SurfaceGrid: validation") {
  CHECK_NOTHROW(testing::simple_wing(2, 4).validate());
  CHECK_THROWS_AS(SurfaceGrid(1, 4).validate(), ArgumentError);
  CHECK_THROWS_AS(SurfaceGrid(2, 3, std::vector<Point3>(5)), ArgumentError);
  auto bad = testing::simple_wing(3, 5);
  bad.at(1, 1).x = NAN;
  CHECK_THROWS_AS(bad.validate(), NumericError);
}
