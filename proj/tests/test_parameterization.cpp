#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ffdgan/aero.hpp"
#include "ffdgan/errors.hpp"
#include "ffdgan/grammar.hpp"
#include "ffdgan/parameterization.hpp"
#include "test_support.hpp"

using namespace ffdgan;
using geom::Point3;
using geom::SurfaceGrid;

namespace {

const SurfaceGrid& mean_wing() {
  static const SurfaceGrid g = [] {
    const auto data = grammar::generate_dataset(grammar::GrammarConfig{}, 60, 5);
    return geom::mean_shape(data.grids);
  }();
  return g;
}

double max_point_diff(const SurfaceGrid& a, const SurfaceGrid& b) {
  double worst = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const auto d = a.points()[p] - b.points()[p];
    worst = std::max({worst, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
  }
  return worst;
}

std::vector<double> random_in(const param::DesignSpace& space, Rng& rng) {
  std::vector<double> x(space.dim());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(space.lower[i], space.upper[i]);
  return x;
}

// Textbook Cox-de Boor written without shared code paths; right-closed at the
// final knot by evaluating just inside it.
double oracle_basis(int i, int p, double t, const std::vector<double>& k) {
  if (p == 0) return (k[i] <= t && t < k[i + 1]) ? 1.0 : 0.0;
  const double a = k[i + p] - k[i];
  const double b = k[i + p + 1] - k[i + 1];
  return (a > 0 ? (t - k[i]) / a * oracle_basis(i, p - 1, t, k) : 0.0) +
         (b > 0 ? (k[i + p + 1] - t) / b * oracle_basis(i + 1, p - 1, t, k) : 0.0);
}

}  // namespace

TEST_CASE("DesignSpace bounds handling") {
  const auto s = param::DesignSpace::symmetric(3, 0.5);
  CHECK(s.dim() == 3);
  s.validate();
  const std::vector<double> in = {0.5, -0.5, 0.0}, out = {0.6, 0.0, 0.0};
  CHECK(s.contains(in));
  CHECK_FALSE(s.contains(out));
  CHECK_THROWS_AS(s.require(out), BoundsError);
  CHECK_THROWS_AS(s.require(std::vector<double>{0.0}), ArgumentError);
  CHECK(s.clip(out)[0] == 0.5);
  const auto u = s.to_unit(in);
  CHECK(u[0] == 1.0);
  CHECK(u[1] == 0.0);
  CHECK(s.from_unit(u) == in);
  CHECK_THROWS_AS((param::DesignSpace{{1.0}, {1.0}}.validate()), ArgumentError);
  param::DesignSpace{{1.0}, {1.0}}.validate(true);
}

TEST_CASE("FFD parameterization") {
  param::FfdParameterization ffd({mean_wing(), {2, 3, 1}, 0.05, 0.1});
  CHECK(ffd.space().dim() == 48);
  for (std::size_t i = 0; i < 48; ++i) {
    CHECK(ffd.space().lower[i] == -0.1);
    CHECK(ffd.space().upper[i] == 0.1);
  }
  const std::vector<double> zero(48, 0.0);
  CHECK(max_point_diff(ffd.decode(zero), mean_wing()) <= 1e-12);

  Rng rng(17);
  const auto x1 = random_in(ffd.space(), rng);
  const auto x2 = random_in(ffd.space(), rng);
  const auto g1 = ffd.decode(x1), g2 = ffd.decode(x2);
  const double a = 0.3, b = 0.6;
  std::vector<double> mix(48);
  for (std::size_t i = 0; i < 48; ++i) mix[i] = a * x1[i] + b * x2[i];
  const auto gm = ffd.decode(mix);
  const auto g0 = ffd.decode(zero);
  double worst = 0.0;
  for (std::size_t p = 0; p < gm.size(); ++p) {
    const auto expect = g0.points()[p] + a * (g1.points()[p] - g0.points()[p]) + b * (g2.points()[p] - g0.points()[p]);
    worst = std::max(worst, std::sqrt(geom::squared_norm(expect - gm.points()[p])));
    CHECK(gm.points()[p].y == g0.points()[p].y);
  }
  CHECK(worst < 1e-10);

  // Same as deforming the lattice directly.
  std::vector<Point3> delta(ffd.lattice().points.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = {x1[i], 0.0, x1[delta.size() + i]};
  CHECK(max_point_diff(geom::ffd_deform(ffd.lattice(), delta, ffd.coords()), g1) < 1e-12);

  auto bad = zero;
  bad[5] = 0.2;
  CHECK_THROWS_AS(ffd.decode(bad), BoundsError);
  CHECK(aero::feasibility(ffd.decode(zero)));

  param::FfdParameterization small({mean_wing(), {1, 2, 1}, 0.05, 0.1});
  CHECK(small.space().dim() == 24);
}

TEST_CASE("bspline_basis") {
  // Degree 0 is the indicator of the knot interval.
  const std::vector<double> k0 = {0.0, 0.25, 0.5, 1.0};
  CHECK(param::bspline_basis(1, 0, 0.3, k0) == 1.0);
  CHECK(param::bspline_basis(0, 0, 0.3, k0) == 0.0);
  CHECK(param::bspline_basis(2, 0, 0.5, k0) == 1.0);
  CHECK(param::bspline_basis(2, 0, 1.0, k0) == 1.0);

  Rng rng(4);
  const auto knots = param::clamped_uniform_knots(9, 3);
  CHECK(knots.size() == 13);
  for (int trial = 0; trial < 100; ++trial) {
    const double t = rng.uniform();
    double sum = 0.0;
    for (int i = 0; i < 9; ++i) {
      const double v = param::bspline_basis(i, 3, t, knots);
      CHECK(v == doctest::Approx(oracle_basis(i, 3, t, knots)).epsilon(1e-14));
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  double end_sum = 0.0;
  for (int i = 0; i < 9; ++i) end_sum += param::bspline_basis(i, 3, 1.0, knots);
  CHECK(end_sum == 1.0);
  CHECK(param::bspline_basis(8, 3, 1.0, knots) == 1.0);

  // Knots 0,0,0,1,2,3,4,5,5,5 (scaled): basis 3 spans [1,4]; at 2.5 it is 3/4.
  const auto k2 = param::clamped_uniform_knots(7, 2);
  CHECK(param::bspline_basis(3, 2, 0.5, k2) == doctest::Approx(0.75).epsilon(1e-14));

  CHECK_THROWS_AS(param::bspline_basis(0, 3, 1.5, knots), DomainError);
  CHECK_THROWS_AS(param::bspline_basis(0, 3, -0.1, knots), DomainError);
  CHECK_THROWS_AS(param::bspline_basis(9, 3, 0.5, knots), ArgumentError);
}

TEST_CASE("bspline fit recovers a representable surface") {
  const int nv = 5, nu = 12;
  param::BsplineSurfaceDef d;
  d.n_u = nu;
  d.n_v = nv;
  d.knots_u = param::clamped_uniform_knots(nu, 3);
  d.knots_v = param::clamped_uniform_knots(nv, 3);
  Rng rng(8);
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      const double th = 2.0 * M_PI * i / (nu - 1.0);
      d.net.push_back({0.5 + 0.5 * std::cos(th) + rng.uniform(-0.01, 0.01), j / (nv - 1.0),
                       0.1 * std::sin(th) + rng.uniform(-0.01, 0.01)});
    }
    d.net[static_cast<std::size_t>(j * nu + nu - 1)] = d.net[static_cast<std::size_t>(j * nu)];
  }
  for (int t = 0; t < 41; ++t) d.params_u.push_back(0.5 * (1.0 - std::cos(M_PI * t / 40.0)));
  for (int s = 0; s < 9; ++s) d.params_v.push_back(s / 8.0);
  const auto surface = d.evaluate();
  const auto fit = param::bspline_fit_base(surface, nv, nu, d.params_u, d.params_v);
  double worst = 0.0;
  for (std::size_t q = 0; q < d.net.size(); ++q) {
    worst = std::max(worst, std::sqrt(geom::squared_norm(fit.net[q] - d.net[q])));
  }
  CHECK(worst < 1e-8);

  // Too little data along the span for the requested net.
  std::vector<double> v2 = {0.0, 1.0};
  SurfaceGrid two(2, 41);
  for (std::size_t t = 0; t < 41; ++t) {
    two.at(0, t) = surface.at(0, t);
    two.at(1, t) = surface.at(8, t);
  }
  CHECK_THROWS_AS(param::bspline_fit_base(two, 4, 6, d.params_u, v2), FittingError);
}

TEST_CASE("bspline fit of the mean shape") {
  const auto& mean = mean_wing();
  const auto coarse = param::bspline_fit_base(mean, 4, 14);
  const double r_coarse = geom::mse_fit_error(coarse.evaluate(), mean);
  CHECK(r_coarse < 1e-4);
  // Knot-refined (nested) spaces: one extra span, doubled chordwise spans.
  const auto fine = param::bspline_fit_base(mean, 5, 25);
  CHECK(geom::mse_fit_error(fine.evaluate(), mean) <= r_coarse * (1.0 + 1e-9));
  coarse.validate();
}

TEST_CASE("bspline parameterization") {
  const auto surf = param::bspline_fit_base(mean_wing(), 4, 14);
  param::BsplineParameterization bs({surf, 5.0, 0.1});
  CHECK(bs.space().dim() == 54);
  CHECK(bs.space().lower[0] == -5.0);
  CHECK(bs.space().upper[1] == 5.0);
  for (std::size_t i = 2; i < 54; ++i) {
    CHECK(bs.space().lower[i] == -0.1);
    CHECK(bs.space().upper[i] == 0.1);
  }
  const std::vector<double> zero(54, 0.0);
  CHECK(bs.decode(zero) == surf.evaluate());
  CHECK_FALSE(geom::self_intersection_check(bs.decode(zero)));
  CHECK(aero::feasibility(bs.decode(zero)));

  param::BsplineParameterization bs18({param::bspline_fit_base(mean_wing(), 4, 18), 5.0, 0.1});
  CHECK(bs18.space().dim() == 70);

  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_in(bs.space(), rng);
    const auto g = bs.decode(x);
    const auto net = bs.deformed_net(x);
    CHECK(max_point_diff(g, surf.evaluate(net)) < 1e-12);
    for (int j = 0; j < surf.n_v; ++j) {
      CHECK(net[static_cast<std::size_t>(j * surf.n_u)] == net[static_cast<std::size_t>(j * surf.n_u + surf.n_u - 1)]);
    }
    // Local convex hull, checked through the bounding box of the control
    // points whose basis functions are active at each surface point.
    for (std::size_t s = 0; s < g.sections(); s += 4) {
      for (std::size_t t = 0; t < g.points_per_section(); t += 7) {
        Point3 lo{1e9, 1e9, 1e9}, hi{-1e9, -1e9, -1e9};
        for (int j = 0; j < surf.n_v; ++j) {
          if (param::bspline_basis(j, 3, surf.params_v[s], surf.knots_v) <= 0.0) continue;
          for (int i = 0; i < surf.n_u; ++i) {
            if (param::bspline_basis(i, 3, surf.params_u[t], surf.knots_u) <= 0.0) continue;
            const auto& q = net[static_cast<std::size_t>(j * surf.n_u + i)];
            lo = {std::min(lo.x, q.x), std::min(lo.y, q.y), std::min(lo.z, q.z)};
            hi = {std::max(hi.x, q.x), std::max(hi.y, q.y), std::max(hi.z, q.z)};
          }
        }
        const auto& p = g.at(s, t);
        CHECK(p.x >= lo.x - 1e-12);
        CHECK(p.x <= hi.x + 1e-12);
        CHECK(p.z >= lo.z - 1e-12);
        CHECK(p.z <= hi.z + 1e-12);
      }
    }
  }

  // Sweep variables only move x, linearly in span.
  auto sweep = zero;
  sweep[0] = 3.0;
  sweep[1] = 3.0;
  const auto swept = bs.decode(sweep);
  const auto base = bs.decode(zero);
  for (std::size_t p = 0; p < swept.size(); ++p) {
    CHECK(swept.points()[p].z == base.points()[p].z);
    CHECK(swept.points()[p].y == base.points()[p].y);
  }
  CHECK(swept.at(0, 0).x == doctest::Approx(base.at(0, 0).x));
  CHECK(swept.at(20, 0).x > base.at(20, 0).x);

  auto bad = zero;
  bad[0] = 6.0;
  CHECK_THROWS_AS(bs.decode(bad), BoundsError);
}
