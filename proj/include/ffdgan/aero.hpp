#pragma once

// Prandtl lifting-line evaluation of a half-wing SurfaceGrid and the
// feasibility predicate built on it.

#include <limits>
#include <span>
#include <vector>

#include "ffdgan/geometry.hpp"
#include "ffdgan/grammar.hpp"

namespace ffdgan::aero {

// Profile drag floor added to induced drag.
inline constexpr double kProfileDrag = 0.01;

struct FlowCondition {
  double mach = 0.4;  // recorded; only used when prandtl_glauert is set
  double alpha_deg = 2.0;
  bool prandtl_glauert = false;
};

struct AeroResult {
  double CL = 0.0;
  double CDi = 0.0;
  double CD0 = kProfileDrag;
  double LD = 0.0;
  double CD() const { return CDi + CD0; }
};

struct SectionProps {
  double alpha_zero_lift_deg = 0.0;
  double lift_slope = 2.0 * M_PI;  // per radian
};

// Thin-airfoil zero-lift angle from the mean camber line; the camber line is
// treated as piecewise linear between stations and the weight integral is
// evaluated in closed form per piece.
SectionProps section_aero_props(std::span<const geom::Point2> section);
SectionProps section_aero_props(const grammar::AirfoilSection& section);

// Two-dimensional lift coefficient at the given geometric angle.
double section_lift_coefficient(const SectionProps& props, double alpha_deg);

struct SpanStation {
  double y = 0.0;
  double chord = 0.0;
  double twist_deg = 0.0;  // positive nose up
  double alpha_zero_lift_deg = 0.0;
};

// One station per grid section. Sections of (near) zero chord borrow twist
// and zero-lift angle from the nearest section with a usable chord.
std::vector<SpanStation> span_stations(const geom::SurfaceGrid& grid);

// Symmetric-flight lifting-line solution with `n_terms` odd Fourier modes
// collocated at cosine-spaced span stations.
AeroResult lifting_line_solve(std::span<const SpanStation> stations, const FlowCondition& cond,
                              int n_terms = 24);
AeroResult lifting_line_solve(const geom::SurfaceGrid& grid, const FlowCondition& cond,
                              int n_terms = 24);

struct FeasibilityReport {
  bool geometric_ok = false;
  bool solved = false;  // lifting line ran (only attempted when geometric_ok)
  double CL = std::numeric_limits<double>::quiet_NaN();
  double LD = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
};

inline constexpr double kFeasibilityAlphaDeg = 2.0;

// Non-self-intersecting and CL/CD > 0 at 2 degrees. Solver failures count as
// infeasible.
FeasibilityReport feasibility_report(const geom::SurfaceGrid& grid);
bool feasibility(const geom::SurfaceGrid& grid);

}  // namespace ffdgan::aero
