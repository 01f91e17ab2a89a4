#include "ffdgan/aero.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ffdgan/errors.hpp"

namespace ffdgan::aero {

using geom::Point2;

namespace {

constexpr double kDeg = M_PI / 180.0;
constexpr int kCamberStations = 200;
// Collocation stations per Fourier term; the system is solved in the
// least-squares sense.
constexpr int kOversample = 4;

double interp_polyline(const std::vector<Point2>& line, double x) {
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Point2& a = line[i];
    const Point2& b = line[i + 1];
    if ((a.x <= x && x <= b.x) || (b.x <= x && x <= a.x)) {
      return a.x == b.x ? a.z : a.z + (x - a.x) / (b.x - a.x) * (b.z - a.z);
    }
  }
  return std::abs(x - line.front().x) < std::abs(x - line.back().x) ? line.front().z : line.back().z;
}

// Antiderivative of sqrt(x / (1 - x)).
double weight_integral(double x) { return std::asin(std::sqrt(x)) - std::sqrt(x * (1.0 - x)); }

}  // namespace

SectionProps section_aero_props(std::span<const Point2> section) {
  if (section.size() < 4) throw GeometryError("section_aero_props: too few points");
  const std::size_t le = geom::leading_edge_index(section);
  const Point2 te = section[0];
  const Point2 origin = section[le];
  const double cx = te.x - origin.x, cz = te.z - origin.z;
  const double chord = std::hypot(cx, cz);
  if (!(chord > 1e-12)) throw GeometryError("section_aero_props: degenerate chord");
  const double c = cx / chord, s = cz / chord;
  auto to_chord_frame = [&](const Point2& p) {
    const double dx = p.x - origin.x, dz = p.z - origin.z;
    return Point2{(c * dx + s * dz) / chord, (-s * dx + c * dz) / chord};
  };

  std::vector<Point2> upper, lower;
  for (std::size_t i = le + 1; i-- > 0;) upper.push_back(to_chord_frame(section[i]));
  for (std::size_t i = le; i < section.size(); ++i) lower.push_back(to_chord_frame(section[i]));
  if (!(section.back() == section.front())) lower.push_back(to_chord_frame(section.front()));

  double alpha0 = 0.0;
  double x_prev = 0.0;
  double camber_prev = 0.5 * (interp_polyline(upper, 0.0) + interp_polyline(lower, 0.0));
  for (int k = 1; k <= kCamberStations; ++k) {
    const double x = 0.5 * (1.0 - std::cos(M_PI * k / kCamberStations));
    const double camber = 0.5 * (interp_polyline(upper, x) + interp_polyline(lower, x));
    const double slope = (camber - camber_prev) / (x - x_prev);
    alpha0 += slope * (weight_integral(std::min(x, 1.0)) - weight_integral(x_prev));
    x_prev = x;
    camber_prev = camber;
  }
  alpha0 *= 2.0 / M_PI;
  return {alpha0 / kDeg, 2.0 * M_PI};
}

SectionProps section_aero_props(const grammar::AirfoilSection& section) {
  return section_aero_props(std::span<const Point2>(section.points));
}

double section_lift_coefficient(const SectionProps& props, double alpha_deg) {
  return props.lift_slope * (alpha_deg - props.alpha_zero_lift_deg) * kDeg;
}

std::vector<SpanStation> span_stations(const geom::SurfaceGrid& grid) {
  const std::size_t m = grid.sections();
  std::vector<SpanStation> out(m);
  std::vector<bool> usable(m, false);
  double max_chord = 0.0;
  std::vector<std::vector<Point2>> polys(m);
  for (std::size_t s = 0; s < m; ++s) {
    const auto sec = grid.section(s);
    double y = 0.0;
    for (const auto& p : sec) y += p.y;
    out[s].y = y / static_cast<double>(sec.size());
    polys[s].reserve(sec.size());
    for (const auto& p : sec) polys[s].push_back({p.x, p.z});
    const Point2 te = polys[s][0];
    Point2 le = te;
    for (const auto& p : polys[s]) {
      if (std::hypot(p.x - te.x, p.z - te.z) > std::hypot(le.x - te.x, le.z - te.z)) le = p;
    }
    out[s].chord = std::hypot(te.x - le.x, te.z - le.z);
    max_chord = std::max(max_chord, out[s].chord);
  }
  if (!(max_chord > 0.0)) throw GeometryError("span_stations: every section has zero chord");
  for (std::size_t s = 0; s < m; ++s) {
    if (out[s].chord <= 1e-9 * max_chord) continue;
    const std::span<const Point2> poly(polys[s]);
    const std::size_t le = geom::leading_edge_index(poly);
    out[s].chord = std::hypot(poly[0].x - poly[le].x, poly[0].z - poly[le].z);
    out[s].twist_deg = std::atan2(poly[le].z - poly[0].z, poly[0].x - poly[le].x) / kDeg;
    out[s].alpha_zero_lift_deg = section_aero_props(poly).alpha_zero_lift_deg;
    usable[s] = true;
  }
  for (std::size_t s = 0; s < m; ++s) {
    if (usable[s]) continue;
    std::size_t best = m;
    for (std::size_t d = 1; d < m && best == m; ++d) {
      if (s >= d && usable[s - d]) best = s - d;
      else if (s + d < m && usable[s + d]) best = s + d;
    }
    out[s].twist_deg = out[best].twist_deg;
    out[s].alpha_zero_lift_deg = out[best].alpha_zero_lift_deg;
  }
  return out;
}

AeroResult lifting_line_solve(std::span<const SpanStation> stations, const FlowCondition& cond,
                              int n_terms) {
  if (n_terms < 8) throw ArgumentError("lifting_line_solve: need at least 8 Fourier terms");
  if (stations.size() < 2) throw ArgumentError("lifting_line_solve: need at least 2 stations");
  const double y0 = stations.front().y;
  const double semispan = stations.back().y - y0;
  if (!(semispan > 0.0)) throw GeometryError("lifting_line_solve: zero span");
  for (std::size_t s = 1; s < stations.size(); ++s) {
    if (stations[s].y < stations[s - 1].y) throw GeometryError("lifting_line_solve: stations out of order");
  }

  // Planform area of the full wing (trapezoid rule is exact for the
  // piecewise-linear chord used below).
  double half_area = 0.0;
  for (std::size_t s = 1; s < stations.size(); ++s) {
    half_area += 0.5 * (stations[s].chord + stations[s - 1].chord) * (stations[s].y - stations[s - 1].y);
  }
  const double span = 2.0 * semispan;
  const double area = 2.0 * half_area;
  if (!(area > 0.0)) throw GeometryError("lifting_line_solve: zero planform area");
  const double aspect = span * span / area;

  auto sample = [&](double y, auto field) {
    if (y <= stations.front().y) return field(stations.front());
    for (std::size_t s = 1; s < stations.size(); ++s) {
      if (y <= stations[s].y) {
        const double dy = stations[s].y - stations[s - 1].y;
        const double t = dy > 0.0 ? (y - stations[s - 1].y) / dy : 1.0;
        return (1.0 - t) * field(stations[s - 1]) + t * field(stations[s]);
      }
    }
    return field(stations.back());
  };

  double slope = 2.0 * M_PI;
  if (cond.prandtl_glauert) {
    if (!(cond.mach >= 0.0 && cond.mach < 1.0)) throw ArgumentError("Prandtl-Glauert needs 0 <= M < 1");
    slope /= std::sqrt(1.0 - cond.mach * cond.mach);
  }

  const int k = n_terms;
  const int rows = kOversample * k;
  Eigen::MatrixXd lhs(rows, k);
  Eigen::VectorXd rhs(rows);
  for (int i = 0; i < rows; ++i) {
    const double theta = (i + 1) * M_PI / (2.0 * rows);
    const double y = y0 + semispan * std::cos(theta);
    const double chord = sample(y, [](const SpanStation& s) { return s.chord; });
    if (!(chord > 0.0)) throw SolverError("lifting_line_solve: zero chord at a collocation point");
    const double twist = sample(y, [](const SpanStation& s) { return s.twist_deg; });
    const double alpha0 = sample(y, [](const SpanStation& s) { return s.alpha_zero_lift_deg; });
    const double mu = 4.0 * span / (slope * chord);
    for (int j = 0; j < k; ++j) {
      const double n = 2.0 * j + 1.0;
      lhs(i, j) = std::sin(n * theta) * (mu + n / std::sin(theta));
    }
    rhs(i) = (cond.alpha_deg + twist - alpha0) * kDeg;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lhs);
  if (qr.rank() < k) throw SolverError("lifting_line_solve: singular collocation system");
  const Eigen::VectorXd coeff = qr.solve(rhs);
  if (!coeff.allFinite()) throw SolverError("lifting_line_solve: non-finite solution");

  AeroResult result;
  result.CL = M_PI * aspect * coeff(0);
  double sum = 0.0;
  for (int j = 0; j < k; ++j) sum += (2.0 * j + 1.0) * coeff(j) * coeff(j);
  result.CDi = M_PI * aspect * sum;
  result.CD0 = kProfileDrag;
  result.LD = result.CL / (result.CDi + result.CD0);
  return result;
}

AeroResult lifting_line_solve(const geom::SurfaceGrid& grid, const FlowCondition& cond, int n_terms) {
  const auto stations = span_stations(grid);
  return lifting_line_solve(stations, cond, n_terms);
}

FeasibilityReport feasibility_report(const geom::SurfaceGrid& grid) {
  FeasibilityReport r;
  try {
    r.geometric_ok = !geom::self_intersection_check(grid);
  } catch (const std::exception&) {
    return r;
  }
  if (!r.geometric_ok) return r;
  try {
    const AeroResult a = lifting_line_solve(grid, FlowCondition{0.4, kFeasibilityAlphaDeg, false});
    r.solved = true;
    r.CL = a.CL;
    r.LD = a.LD;
    r.feasible = a.LD > 0.0;
  } catch (const std::exception&) {
  }
  return r;
}

bool feasibility(const geom::SurfaceGrid& grid) { return feasibility_report(grid).feasible; }

}  // namespace ffdgan::aero
