#pragma once

// Design vector -> SurfaceGrid maps: FFD offsets, B-spline surface variables,
// and (in gan_param.hpp) a trained generator's latent space.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ffdgan/geometry.hpp"

namespace ffdgan::param {

struct DesignSpace {
  std::vector<double> lower;
  std::vector<double> upper;

  static DesignSpace symmetric(std::size_t dim, double bound);

  std::size_t dim() const { return lower.size(); }
  // lower < upper elementwise, matching sizes. Zero-width variables are
  // allowed only when `allow_degenerate` is set.
  void validate(bool allow_degenerate = false) const;
  bool contains(std::span<const double> x, double tol = 1e-12) const;
  // Throws BoundsError naming the first offending variable.
  void require(std::span<const double> x, double tol = 1e-12) const;
  std::vector<double> clip(std::span<const double> x) const;
  std::vector<double> from_unit(std::span<const double> u) const;
  std::vector<double> to_unit(std::span<const double> x) const;
};

class Parameterization {
 public:
  virtual ~Parameterization() = default;
  virtual std::string kind() const = 0;
  virtual const DesignSpace& space() const = 0;
  virtual geom::SurfaceGrid decode(std::span<const double> x) const = 0;
};

// ---------------------------------------------------------------- FFD ----

struct FfdParamDef {
  geom::SurfaceGrid base;         // embedded shape, usually the dataset mean
  geom::LatticeDims dims{2, 3, 1};
  double inflation = 0.05;        // box margin per side, fraction of extent
  double bound = 0.1;             // |offset| limit per variable
};

// Variables are the x offsets of every control point (lattice order) followed
// by the z offsets; y offsets are fixed at zero.
class FfdParameterization final : public Parameterization {
 public:
  explicit FfdParameterization(FfdParamDef def);

  std::string kind() const override { return "ffd"; }
  const DesignSpace& space() const override { return space_; }
  geom::SurfaceGrid decode(std::span<const double> x) const override;

  const FfdParamDef& def() const { return def_; }
  const geom::ControlLattice& lattice() const { return lattice_; }
  const geom::ParamCoords& coords() const { return coords_; }
  // Row-major (grid points x lattice points) Bernstein weight matrix.
  const std::vector<double>& weights() const { return weights_; }
  // Surface reproduced by the undeformed lattice.
  const geom::SurfaceGrid& embedded() const { return embedded_; }

 private:
  FfdParamDef def_;
  geom::ControlLattice lattice_;
  geom::ParamCoords coords_;
  std::vector<double> weights_;
  geom::SurfaceGrid embedded_;
  DesignSpace space_;
};

// ----------------------------------------------------------- B-spline ----

double bspline_basis(int i, int degree, double t, std::span<const double> knots);

// Clamped knot vector with uniform interior spacing on [0, 1].
std::vector<double> clamped_uniform_knots(int n_ctrl, int degree);

// Values of all basis functions at each parameter, row-major
// (params x n_ctrl).
std::vector<double> bspline_basis_matrix(std::span<const double> params, int degree,
                                         std::span<const double> knots);

struct BsplineSurfaceDef {
  int degree_u = 3;                // chordwise
  int degree_v = 3;                // spanwise
  int n_u = 14;                    // chordwise control points (first == last)
  int n_v = 4;                     // spanwise control points
  std::vector<geom::Point3> net;   // n_v x n_u, row-major by spanwise index
  std::vector<double> knots_u, knots_v;
  std::vector<double> params_u;    // one per grid point along a section
  std::vector<double> params_v;    // one per grid section
  double sweep_le_deg = 0.0;       // sweep of the control-net leading edge
  double sweep_te_deg = 0.0;       // sweep of the control-net trailing edge

  void validate() const;
  geom::SurfaceGrid evaluate() const;
  geom::SurfaceGrid evaluate(std::span<const geom::Point3> net_override) const;
};

// Chordwise parameters from the mean normalized arc length of each section,
// spanwise parameters from normalized section y.
void arc_length_params(const geom::SurfaceGrid& grid, std::vector<double>& u,
                       std::vector<double>& v);

// Least-squares control net for `target` with the closed trailing edge held
// as an equality constraint. `n_v` x `n_u` control points.
BsplineSurfaceDef bspline_fit_base(const geom::SurfaceGrid& target, int n_v, int n_u);
BsplineSurfaceDef bspline_fit_base(const geom::SurfaceGrid& target, int n_v, int n_u,
                                   std::vector<double> params_u, std::vector<double> params_v);

struct BsplineParamDef {
  BsplineSurfaceDef surface;
  double sweep_bound_deg = 5.0;
  double z_bound = 0.1;
};

// Variables: leading- and trailing-edge sweep deltas (degrees), then z offsets
// of the free control points (spanwise-major; the duplicated trailing-edge
// point shares one variable).
class BsplineParameterization final : public Parameterization {
 public:
  explicit BsplineParameterization(BsplineParamDef def);

  std::string kind() const override { return "bspline"; }
  const DesignSpace& space() const override { return space_; }
  geom::SurfaceGrid decode(std::span<const double> x) const override;

  const BsplineParamDef& def() const { return def_; }
  std::vector<geom::Point3> deformed_net(std::span<const double> x) const;
  // Row-major (grid points x free z variables) map from z offsets to surface z.
  const std::vector<double>& z_weights() const { return z_weights_; }
  const geom::SurfaceGrid& base_surface() const { return base_surface_; }
  // Surface x shift per grid point for given sweep deltas.
  std::vector<double> sweep_shift(double d_le_deg, double d_te_deg) const;

 private:
  BsplineParamDef def_;
  DesignSpace space_;
  std::vector<double> basis_u_, basis_v_;
  std::vector<double> chord_weight_;  // 0 at the LE control column, 1 at TE
  std::vector<double> row_y_;         // spanwise distance of each control row from the root
  std::vector<double> z_weights_;
  geom::SurfaceGrid base_surface_;
};

}  // namespace ffdgan::param
