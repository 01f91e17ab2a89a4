#include "ffdgan/parameterization.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "ffdgan/errors.hpp"
#include "ffdgan/kernels.hpp"

namespace ffdgan::param {

using geom::Point3;
using geom::SurfaceGrid;

DesignSpace DesignSpace::symmetric(std::size_t dim, double bound) {
  return {std::vector<double>(dim, -bound), std::vector<double>(dim, bound)};
}

void DesignSpace::validate(bool allow_degenerate) const {
  if (lower.size() != upper.size()) throw ArgumentError("DesignSpace: bound sizes differ");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw ArgumentError("DesignSpace: non-finite bound");
    }
    if (allow_degenerate ? lower[i] > upper[i] : !(lower[i] < upper[i])) {
      throw ArgumentError("DesignSpace: lower >= upper for variable " + std::to_string(i));
    }
  }
}

bool DesignSpace::contains(std::span<const double> x, double tol) const {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] - tol && x[i] <= upper[i] + tol)) return false;
  }
  return true;
}

void DesignSpace::require(std::span<const double> x, double tol) const {
  if (x.size() != dim()) {
    throw ArgumentError("design vector has " + std::to_string(x.size()) + " entries, expected " +
                        std::to_string(dim()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] - tol && x[i] <= upper[i] + tol)) {
      throw BoundsError("design variable " + std::to_string(i) + " = " + std::to_string(x[i]) +
                        " outside [" + std::to_string(lower[i]) + ", " + std::to_string(upper[i]) + "]");
    }
  }
}

std::vector<double> DesignSpace::clip(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(upper[i], std::max(lower[i], out[i]));
  return out;
}

std::vector<double> DesignSpace::from_unit(std::span<const double> u) const {
  if (u.size() != dim()) throw ArgumentError("from_unit: size mismatch");
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = lower[i] + u[i] * (upper[i] - lower[i]);
  return out;
}

std::vector<double> DesignSpace::to_unit(std::span<const double> x) const {
  if (x.size() != dim()) throw ArgumentError("to_unit: size mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = upper[i] - lower[i];
    out[i] = w > 0.0 ? (x[i] - lower[i]) / w : 0.5;
  }
  return out;
}

// ---------------------------------------------------------------- FFD ----

FfdParameterization::FfdParameterization(FfdParamDef def) : def_(std::move(def)) {
  def_.base.validate();
  if (!(def_.bound >= 0.0)) throw ArgumentError("ffd: bound must be non-negative");
  if (!(def_.inflation >= 0.0)) throw ArgumentError("ffd: inflation must be non-negative");
  const auto box = geom::BoundingBox::of(def_.base.points()).inflated(def_.inflation);
  lattice_ = geom::base_lattice(box, def_.dims.l, def_.dims.m, def_.dims.n);
  coords_ = geom::param_coords(def_.base, box);
  weights_ = geom::ffd_weights(def_.dims, coords_);
  const std::vector<Point3> zero(lattice_.points.size());
  embedded_ = geom::ffd_deform(lattice_, zero, coords_);
  space_ = DesignSpace::symmetric(2 * lattice_.points.size(), def_.bound);
}

SurfaceGrid FfdParameterization::decode(std::span<const double> x) const {
  space_.require(x);
  const std::size_t lp = lattice_.points.size();
  const std::size_t np = embedded_.size();
  std::vector<double> rhs(lp * 2);
  for (std::size_t i = 0; i < lp; ++i) {
    rhs[2 * i] = x[i];
    rhs[2 * i + 1] = x[lp + i];
  }
  std::vector<double> shift(np * 2);
  kernels::gemm(weights_, rhs, shift, np, lp, 2);
  SurfaceGrid out = embedded_;
  auto pts = out.points();
  for (std::size_t p = 0; p < np; ++p) {
    pts[p].x += shift[2 * p];
    pts[p].z += shift[2 * p + 1];
  }
  return out;
}

// ----------------------------------------------------------- B-spline ----

namespace {

double basis_recursive(int i, int p, double t, std::span<const double> knots, int last_span) {
  if (p == 0) {
    const double a = knots[static_cast<std::size_t>(i)];
    const double b = knots[static_cast<std::size_t>(i) + 1];
    if (a <= t && t < b) return 1.0;
    return (t == knots.back() && i == last_span) ? 1.0 : 0.0;
  }
  double value = 0.0;
  const double ti = knots[static_cast<std::size_t>(i)];
  const double tip = knots[static_cast<std::size_t>(i + p)];
  const double ti1 = knots[static_cast<std::size_t>(i) + 1];
  const double tip1 = knots[static_cast<std::size_t>(i + p) + 1];
  if (tip > ti) value += (t - ti) / (tip - ti) * basis_recursive(i, p - 1, t, knots, last_span);
  if (tip1 > ti1) value += (tip1 - t) / (tip1 - ti1) * basis_recursive(i + 1, p - 1, t, knots, last_span);
  return value;
}

}  // namespace

double bspline_basis(int i, int degree, double t, std::span<const double> knots) {
  if (degree < 0) throw ArgumentError("bspline_basis: negative degree");
  const int n_ctrl = static_cast<int>(knots.size()) - degree - 1;
  if (n_ctrl < 1) throw ArgumentError("bspline_basis: too few knots for degree");
  if (i < 0 || i >= n_ctrl) throw ArgumentError("bspline_basis: index out of range");
  for (std::size_t k = 1; k < knots.size(); ++k) {
    if (knots[k] < knots[k - 1]) throw ArgumentError("bspline_basis: knots must be non-decreasing");
  }
  if (!(t >= knots.front() && t <= knots.back())) {
    throw DomainError("bspline_basis: parameter outside the knot range");
  }
  int last_span = static_cast<int>(knots.size()) - 2;
  auto empty_span = [&](int s) {
    return !(knots[static_cast<std::size_t>(s)] < knots[static_cast<std::size_t>(s) + 1]);
  };
  while (last_span > 0 && empty_span(last_span)) {
    --last_span;
  }
  return basis_recursive(i, degree, t, knots, last_span);
}

std::vector<double> clamped_uniform_knots(int n_ctrl, int degree) {
  if (degree < 0 || n_ctrl < degree + 1) throw ArgumentError("clamped_uniform_knots: need n_ctrl > degree");
  const int spans = n_ctrl - degree;
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(n_ctrl + degree + 1));
  for (int k = 0; k < degree; ++k) knots.push_back(0.0);
  for (int k = 0; k <= spans; ++k) knots.push_back(static_cast<double>(k) / spans);
  for (int k = 0; k < degree; ++k) knots.push_back(1.0);
  return knots;
}

std::vector<double> bspline_basis_matrix(std::span<const double> params, int degree,
                                         std::span<const double> knots) {
  const int n_ctrl = static_cast<int>(knots.size()) - degree - 1;
  if (n_ctrl < 1) throw ArgumentError("bspline_basis_matrix: too few knots");
  std::vector<double> out(params.size() * static_cast<std::size_t>(n_ctrl));
  for (std::size_t r = 0; r < params.size(); ++r) {
    for (int i = 0; i < n_ctrl; ++i) {
      out[r * static_cast<std::size_t>(n_ctrl) + static_cast<std::size_t>(i)] =
          bspline_basis(i, degree, params[r], knots);
    }
  }
  return out;
}

void BsplineSurfaceDef::validate() const {
  if (degree_u < 1 || degree_v < 1) throw ArgumentError("bspline: degrees must be >= 1");
  if (n_u < degree_u + 2 || n_v < degree_v + 1) throw ArgumentError("bspline: too few control points");
  if (net.size() != static_cast<std::size_t>(n_u) * static_cast<std::size_t>(n_v)) {
    throw ArgumentError("bspline: control net size mismatch");
  }
  if (knots_u.size() != static_cast<std::size_t>(n_u + degree_u + 1) ||
      knots_v.size() != static_cast<std::size_t>(n_v + degree_v + 1)) {
    throw ArgumentError("bspline: knot vector length mismatch");
  }
  for (const auto* knots : {&knots_u, &knots_v}) {
    for (std::size_t k = 1; k < knots->size(); ++k) {
      if ((*knots)[k] < (*knots)[k - 1]) throw ArgumentError("bspline: knots must be non-decreasing");
    }
  }
  for (int j = 0; j < n_v; ++j) {
    const auto row = static_cast<std::size_t>(j) * static_cast<std::size_t>(n_u);
    if (!(net[row] == net[row + static_cast<std::size_t>(n_u) - 1])) {
      throw ArgumentError("bspline: trailing edge not closed in control row " + std::to_string(j));
    }
  }
  if (params_u.size() < 4 || params_v.size() < 2) throw ArgumentError("bspline: parameter grid too small");
}

SurfaceGrid BsplineSurfaceDef::evaluate() const { return evaluate(net); }

SurfaceGrid BsplineSurfaceDef::evaluate(std::span<const Point3> ctrl) const {
  validate();
  if (ctrl.size() != net.size()) throw ArgumentError("bspline evaluate: net size mismatch");
  const std::size_t nu = static_cast<std::size_t>(n_u), nv = static_cast<std::size_t>(n_v);
  const std::size_t np = params_u.size(), ns = params_v.size();
  const auto bu = bspline_basis_matrix(params_u, degree_u, knots_u);
  const auto bv = bspline_basis_matrix(params_v, degree_v, knots_v);
  // Net as (nv x nu*3), then rows x columns: (ns x nv)(nv x nu*3) -> (ns x nu*3).
  std::vector<double> flat(nv * nu * 3);
  for (std::size_t q = 0; q < ctrl.size(); ++q) {
    flat[3 * q] = ctrl[q].x;
    flat[3 * q + 1] = ctrl[q].y;
    flat[3 * q + 2] = ctrl[q].z;
  }
  std::vector<double> spanwise(ns * nu * 3);
  kernels::gemm(bv, flat, spanwise, ns, nv, nu * 3);
  SurfaceGrid out(ns, np);
  std::vector<double> section(np * 3);
  for (std::size_t s = 0; s < ns; ++s) {
    kernels::gemm(bu, std::span<const double>(spanwise).subspan(s * nu * 3, nu * 3), section, np, nu, 3);
    for (std::size_t t = 0; t < np; ++t) out.at(s, t) = {section[3 * t], section[3 * t + 1], section[3 * t + 2]};
  }
  return out;
}

void arc_length_params(const SurfaceGrid& grid, std::vector<double>& u, std::vector<double>& v) {
  grid.validate();
  const std::size_t m = grid.sections(), n = grid.points_per_section();
  u.assign(n, 0.0);
  std::vector<double> acc(n);
  for (std::size_t s = 0; s < m; ++s) {
    acc[0] = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
      acc[t] = acc[t - 1] + std::sqrt(geom::squared_norm(grid.at(s, t) - grid.at(s, t - 1)));
    }
    if (!(acc[n - 1] > 0.0)) throw GeometryError("arc_length_params: zero-length section");
    for (std::size_t t = 0; t < n; ++t) u[t] += acc[t] / acc[n - 1];
  }
  for (auto& value : u) value /= static_cast<double>(m);
  u.front() = 0.0;
  u.back() = 1.0;

  v.assign(m, 0.0);
  std::vector<double> ys(m);
  for (std::size_t s = 0; s < m; ++s) {
    double y = 0.0;
    for (const auto& p : grid.section(s)) y += p.y;
    ys[s] = y / static_cast<double>(n);
  }
  const double span = ys.back() - ys.front();
  if (!(span > 0.0)) throw GeometryError("arc_length_params: zero span");
  for (std::size_t s = 0; s < m; ++s) v[s] = std::min(1.0, std::max(0.0, (ys[s] - ys.front()) / span));
  v.front() = 0.0;
  v.back() = 1.0;
}

namespace {

// (grid points x n_v*(n_u-1)) design matrix with the two trailing-edge columns
// of each control row merged.
Eigen::MatrixXd closed_design_matrix(const BsplineSurfaceDef& d) {
  const std::size_t nu = static_cast<std::size_t>(d.n_u), nv = static_cast<std::size_t>(d.n_v);
  const std::size_t np = d.params_u.size(), ns = d.params_v.size();
  const auto bu = bspline_basis_matrix(d.params_u, d.degree_u, d.knots_u);
  const auto bv = bspline_basis_matrix(d.params_v, d.degree_v, d.knots_v);
  const std::size_t free_u = nu - 1;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(ns * np), static_cast<Eigen::Index>(nv * free_u));
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t t = 0; t < np; ++t) {
      const auto r = static_cast<Eigen::Index>(s * np + t);
      for (std::size_t j = 0; j < nv; ++j) {
        const double wv = bv[s * nv + j];
        for (std::size_t i = 0; i < free_u; ++i) {
          double wu = bu[t * nu + i];
          if (i == 0) wu += bu[t * nu + nu - 1];
          a(r, static_cast<Eigen::Index>(j * free_u + i)) = wv * wu;
        }
      }
    }
  }
  return a;
}

}  // namespace

BsplineSurfaceDef bspline_fit_base(const SurfaceGrid& target, int n_v, int n_u) {
  std::vector<double> u, v;
  arc_length_params(target, u, v);
  return bspline_fit_base(target, n_v, n_u, std::move(u), std::move(v));
}

BsplineSurfaceDef bspline_fit_base(const SurfaceGrid& target, int n_v, int n_u,
                                   std::vector<double> params_u, std::vector<double> params_v) {
  target.validate();
  if (params_u.size() != target.points_per_section() || params_v.size() != target.sections()) {
    throw ArgumentError("bspline_fit_base: parameter grid does not match the target");
  }
  BsplineSurfaceDef d;
  d.n_u = n_u;
  d.n_v = n_v;
  if (n_u < d.degree_u + 2 || n_v < d.degree_v + 1) throw ArgumentError("bspline_fit_base: too few control points");
  if (static_cast<std::size_t>(n_u) * static_cast<std::size_t>(n_v) > target.size()) {
    throw ArgumentError("bspline_fit_base: more control points than samples");
  }
  d.knots_u = clamped_uniform_knots(n_u, d.degree_u);
  d.knots_v = clamped_uniform_knots(n_v, d.degree_v);
  d.params_u = std::move(params_u);
  d.params_v = std::move(params_v);

  const Eigen::MatrixXd a = closed_design_matrix(d);
  Eigen::MatrixXd rhs(a.rows(), 3);
  const auto pts = target.points();
  for (std::size_t p = 0; p < pts.size(); ++p) {
    rhs(static_cast<Eigen::Index>(p), 0) = pts[p].x;
    rhs(static_cast<Eigen::Index>(p), 1) = pts[p].y;
    rhs(static_cast<Eigen::Index>(p), 2) = pts[p].z;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols()) throw FittingError("bspline_fit_base: rank-deficient least-squares system");
  const Eigen::MatrixXd sol = qr.solve(rhs);

  const std::size_t nu = static_cast<std::size_t>(n_u), free_u = nu - 1;
  d.net.resize(static_cast<std::size_t>(n_v) * nu);
  for (std::size_t j = 0; j < static_cast<std::size_t>(n_v); ++j) {
    for (std::size_t i = 0; i < nu; ++i) {
      const auto c = static_cast<Eigen::Index>(j * free_u + (i == nu - 1 ? 0 : i));
      d.net[j * nu + i] = {sol(c, 0), sol(c, 1), sol(c, 2)};
    }
  }

  // Sweep of the control-net leading and trailing edges.
  const std::size_t tip = (static_cast<std::size_t>(n_v) - 1) * nu;
  std::size_t le = 0;
  for (std::size_t i = 1; i < nu; ++i) {
    if (d.net[i].x < d.net[le].x) le = i;
  }
  const double dy = d.net[tip].y - d.net[0].y;
  if (!(dy > 0.0)) throw FittingError("bspline_fit_base: control net has no span");
  d.sweep_le_deg = std::atan((d.net[tip + le].x - d.net[le].x) / dy) * 180.0 / M_PI;
  d.sweep_te_deg = std::atan((d.net[tip].x - d.net[0].x) / dy) * 180.0 / M_PI;
  return d;
}

BsplineParameterization::BsplineParameterization(BsplineParamDef def) : def_(std::move(def)) {
  const auto& d = def_.surface;
  d.validate();
  if (!(def_.sweep_bound_deg >= 0.0 && def_.sweep_bound_deg < 45.0) || !(def_.z_bound >= 0.0)) {
    throw ArgumentError("bspline param: invalid bounds");
  }
  const std::size_t nu = static_cast<std::size_t>(d.n_u), nv = static_cast<std::size_t>(d.n_v);
  const std::size_t n_z = nv * (nu - 1);
  space_.lower.assign(2 + n_z, -def_.z_bound);
  space_.upper.assign(2 + n_z, def_.z_bound);
  space_.lower[0] = space_.lower[1] = -def_.sweep_bound_deg;
  space_.upper[0] = space_.upper[1] = def_.sweep_bound_deg;

  basis_u_ = bspline_basis_matrix(d.params_u, d.degree_u, d.knots_u);
  basis_v_ = bspline_basis_matrix(d.params_v, d.degree_v, d.knots_v);
  base_surface_ = d.evaluate();

  std::size_t le = 0;
  for (std::size_t i = 1; i < nu; ++i) {
    if (d.net[i].x < d.net[le].x) le = i;
  }
  const double x_le = d.net[le].x, x_te = d.net[0].x;
  chord_weight_.resize(nu);
  for (std::size_t i = 0; i < nu; ++i) {
    const double w = x_te > x_le ? (d.net[i].x - x_le) / (x_te - x_le) : 0.0;
    chord_weight_[i] = std::min(1.0, std::max(0.0, w));
  }
  row_y_.resize(nv);
  for (std::size_t j = 0; j < nv; ++j) {
    double y = 0.0;
    for (std::size_t i = 0; i < nu; ++i) y += d.net[j * nu + i].y;
    row_y_[j] = y / static_cast<double>(nu);
  }
  const double y_root = row_y_[0];
  for (auto& y : row_y_) y -= y_root;

  const Eigen::MatrixXd a = closed_design_matrix(d);
  z_weights_.resize(static_cast<std::size_t>(a.size()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      z_weights_[static_cast<std::size_t>(r * a.cols() + c)] = a(r, c);
    }
  }
}

std::vector<Point3> BsplineParameterization::deformed_net(std::span<const double> x) const {
  space_.require(x);
  const auto& d = def_.surface;
  const std::size_t nu = static_cast<std::size_t>(d.n_u), nv = static_cast<std::size_t>(d.n_v);
  const double rad = M_PI / 180.0;
  const double a = std::tan((d.sweep_le_deg + x[0]) * rad) - std::tan(d.sweep_le_deg * rad);
  const double b = std::tan((d.sweep_te_deg + x[1]) * rad) - std::tan(d.sweep_te_deg * rad);
  std::vector<Point3> net = d.net;
  for (std::size_t j = 0; j < nv; ++j) {
    for (std::size_t i = 0; i < nu; ++i) {
      const double lam = chord_weight_[i];
      auto& p = net[j * nu + i];
      p.x += row_y_[j] * ((1.0 - lam) * a + lam * b);
      p.z += x[2 + j * (nu - 1) + (i == nu - 1 ? 0 : i)];
    }
  }
  return net;
}

std::vector<double> BsplineParameterization::sweep_shift(double d_le_deg, double d_te_deg) const {
  const auto& d = def_.surface;
  const std::size_t nu = static_cast<std::size_t>(d.n_u), nv = static_cast<std::size_t>(d.n_v);
  const std::size_t np = d.params_u.size(), ns = d.params_v.size();
  const double rad = M_PI / 180.0;
  const double a = std::tan((d.sweep_le_deg + d_le_deg) * rad) - std::tan(d.sweep_le_deg * rad);
  const double b = std::tan((d.sweep_te_deg + d_te_deg) * rad) - std::tan(d.sweep_te_deg * rad);
  // Net shift is row_y (outer) chord weight; the surface shift factorizes.
  std::vector<double> su(np, 0.0), sv(ns, 0.0);
  for (std::size_t t = 0; t < np; ++t) {
    for (std::size_t i = 0; i < nu; ++i) {
      su[t] += basis_u_[t * nu + i] * ((1.0 - chord_weight_[i]) * a + chord_weight_[i] * b);
    }
  }
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t j = 0; j < nv; ++j) sv[s] += basis_v_[s * nv + j] * row_y_[j];
  }
  std::vector<double> out(ns * np);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t t = 0; t < np; ++t) out[s * np + t] = sv[s] * su[t];
  }
  return out;
}

SurfaceGrid BsplineParameterization::decode(std::span<const double> x) const {
  space_.require(x);
  const std::size_t np = base_surface_.size();
  const std::size_t n_z = space_.dim() - 2;
  std::vector<double> dz(np);
  kernels::gemm(z_weights_, x.subspan(2), dz, np, n_z, 1);
  const auto shift = sweep_shift(x[0], x[1]);
  SurfaceGrid out = base_surface_;
  auto pts = out.points();
  for (std::size_t p = 0; p < np; ++p) {
    pts[p].x += shift[p];
    pts[p].z += dz[p];
  }
  return out;
}

}  // namespace ffdgan::param
