#pragma once

// Shared fixtures and brute-force oracles for the unit tests. Oracles here are
// written independently of the library code paths they check.

#include <cmath>
#include <limits>
#include <vector>

#include "ffdgan/geometry.hpp"
#include "ffdgan/rng.hpp"

namespace testing {

using ffdgan::geom::Point3;
using ffdgan::geom::SurfaceGrid;

// Elliptical sections (TE -> upper -> LE -> lower -> TE) at evenly spaced y,
// tapering chord and a little sweep. Closed trailing edge.
inline SurfaceGrid simple_wing(std::size_t m, std::size_t n, double root_chord = 0.4,
                               double taper = 0.5, double thickness = 0.06) {
  SurfaceGrid g(m, n);
  for (std::size_t s = 0; s < m; ++s) {
    const double eta = static_cast<double>(s) / static_cast<double>(m - 1);
    const double chord = root_chord * (1.0 - (1.0 - taper) * eta);
    const double sweep = 0.2 * eta;
    for (std::size_t t = 0; t < n; ++t) {
      const double th = 2.0 * M_PI * static_cast<double>(t) / static_cast<double>(n - 1);
      g.at(s, t) = {sweep + chord * 0.5 * (1.0 + std::cos(th)), eta,
                    chord * thickness * std::sin(th)};
    }
    g.at(s, n - 1) = g.at(s, 0);
  }
  return g;
}

inline SurfaceGrid random_grid(ffdgan::Rng& rng, std::size_t m, std::size_t n, double scale = 1.0) {
  SurfaceGrid g(m, n);
  for (auto& p : g.points()) {
    p = {rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
  }
  return g;
}

inline double brute_hausdorff(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  auto directed = [](const std::vector<Point3>& from, const std::vector<Point3>& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
        best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

inline double brute_mse(const SurfaceGrid& a, const SurfaceGrid& b) {
  double sum = 0.0;
  for (std::size_t s = 0; s < a.sections(); ++s) {
    for (std::size_t t = 0; t < a.points_per_section(); ++t) {
      const Point3 d = a.at(s, t) - b.at(s, t);
      sum += d.x * d.x + d.y * d.y + d.z * d.z;
    }
  }
  return sum / static_cast<double>(a.sections() * a.points_per_section());
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Literal triple sum of Bernstein products over the control points.
inline Point3 naive_ffd_point(int l, int m, int n, const std::vector<Point3>& control, double u,
                              double v, double w) {
  Point3 out;
  for (int i = 0; i <= l; ++i) {
    for (int j = 0; j <= m; ++j) {
      for (int k = 0; k <= n; ++k) {
        const double b = binomial(l, i) * std::pow(u, i) * std::pow(1 - u, l - i) *
                         binomial(m, j) * std::pow(v, j) * std::pow(1 - v, m - j) *
                         binomial(n, k) * std::pow(w, k) * std::pow(1 - w, n - k);
        const Point3& p = control[static_cast<std::size_t>((i * (m + 1) + j) * (n + 1) + k)];
        out.x += b * p.x;
        out.y += b * p.y;
        out.z += b * p.z;
      }
    }
  }
  return out;
}

inline double max_abs_diff(const SurfaceGrid& a, const SurfaceGrid& b) {
  double worst = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const Point3 d = a.points()[p] - b.points()[p];
    worst = std::max({worst, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
  }
  return worst;
}

}  // namespace testing
