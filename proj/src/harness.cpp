#include "ffdgan/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/Dense>

#include "ffdgan/aero.hpp"
#include "ffdgan/autodiff.hpp"
#include "ffdgan/bayes_opt.hpp"
#include "ffdgan/errors.hpp"
#include "ffdgan/gan_param.hpp"
#include "ffdgan/io.hpp"

namespace ffdgan::harness {

using geom::Point3;
using geom::SurfaceGrid;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

constexpr std::uint64_t kRestartSalt = 0x666974;  // "fit"
constexpr std::uint64_t kSampleSalt = 0x666561;   // "fea"

void require_same_grid(const SurfaceGrid& a, const SurfaceGrid& b) {
  if (a.sections() != b.sections() || a.points_per_section() != b.points_per_section()) {
    throw ArgumentError("fit: target grid size differs from the parameterization's");
  }
}

Eigen::VectorXd solve_ls(const Eigen::Ref<const RowMatrix>& a, const Eigen::VectorXd& b) {
  return a.completeOrthogonalDecomposition().solve(b);
}

FitResult finish(const param::Parameterization& param, std::vector<double> x,
                 const SurfaceGrid& target) {
  FitResult r;
  r.x = param.space().clip(x);
  const SurfaceGrid fitted = param.decode(r.x);
  r.mse = geom::mse_fit_error(fitted, target);
  r.hausdorff = geom::hausdorff(fitted, target);
  if (!std::isfinite(r.mse) || !std::isfinite(r.hausdorff)) {
    r.warning = true;
    r.message = "non-finite fit error";
  }
  return r;
}

}  // namespace

std::vector<double> box_least_squares(std::span<const double> a, std::size_t rows,
                                      std::size_t cols, std::span<const double> b,
                                      std::span<const double> lower,
                                      std::span<const double> upper) {
  if (a.size() != rows * cols || b.size() != rows || lower.size() != cols ||
      upper.size() != cols) {
    throw ArgumentError("box_least_squares: size mismatch");
  }
  const Eigen::Map<const RowMatrix> am(a.data(), static_cast<Eigen::Index>(rows),
                                       static_cast<Eigen::Index>(cols));
  const Eigen::VectorXd bv = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(rows));
  Eigen::VectorXd x = solve_ls(am, bv);
  std::vector<double> out(cols);
  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < cols; ++i) {
    const double v = x[static_cast<Eigen::Index>(i)];
    out[i] = std::clamp(v, lower[i], upper[i]);
    if (out[i] == v) free_idx.push_back(i);
  }
  if (free_idx.size() == cols || free_idx.empty()) return out;

  Eigen::VectorXd rhs = bv;
  for (std::size_t i = 0; i < cols; ++i) {
    if (std::find(free_idx.begin(), free_idx.end(), i) != free_idx.end()) continue;
    rhs -= am.col(static_cast<Eigen::Index>(i)) * out[i];
  }
  RowMatrix sub(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(free_idx.size()));
  for (std::size_t k = 0; k < free_idx.size(); ++k) {
    sub.col(static_cast<Eigen::Index>(k)) = am.col(static_cast<Eigen::Index>(free_idx[k]));
  }
  const Eigen::VectorXd xf = solve_ls(sub, rhs);
  for (std::size_t k = 0; k < free_idx.size(); ++k) {
    const std::size_t i = free_idx[k];
    out[i] = std::clamp(xf[static_cast<Eigen::Index>(k)], lower[i], upper[i]);
  }
  return out;
}

// ------------------------------------------------------------ fitters ----

struct Fitter::Impl {
  const param::Parameterization& param;
  FitOptions options;

  explicit Impl(const param::Parameterization& p, FitOptions o) : param(p), options(o) {}
  virtual ~Impl() = default;
  virtual FitResult fit(const SurfaceGrid& target, std::uint64_t stream) const = 0;
};

namespace {

class FfdFitter final : public Fitter::Impl {
 public:
  FfdFitter(const param::FfdParameterization& p, FitOptions o) : Impl(p, o), ffd_(p) {}

  FitResult fit(const SurfaceGrid& target, std::uint64_t) const override {
    const SurfaceGrid& e = ffd_.embedded();
    require_same_grid(e, target);
    const std::size_t np = e.size(), lp = ffd_.lattice().points.size();
    std::vector<double> bx(np), bz(np);
    for (std::size_t p = 0; p < np; ++p) {
      bx[p] = target.points()[p].x - e.points()[p].x;
      bz[p] = target.points()[p].z - e.points()[p].z;
    }
    const auto& sp = ffd_.space();
    const std::span<const double> lo(sp.lower), hi(sp.upper);
    const auto dx = box_least_squares(ffd_.weights(), np, lp, bx, lo.first(lp), hi.first(lp));
    const auto dz = box_least_squares(ffd_.weights(), np, lp, bz, lo.subspan(lp), hi.subspan(lp));
    std::vector<double> x(dx);
    x.insert(x.end(), dz.begin(), dz.end());
    return finish(param, std::move(x), target);
  }

 private:
  const param::FfdParameterization& ffd_;
};

class BsplineFitter final : public Fitter::Impl {
 public:
  BsplineFitter(const param::BsplineParameterization& p, FitOptions o) : Impl(p, o), bs_(p) {}

  FitResult fit(const SurfaceGrid& target, std::uint64_t) const override {
    const SurfaceGrid& base = bs_.base_surface();
    require_same_grid(base, target);
    const std::size_t np = base.size(), nz = bs_.space().dim() - 2;
    const auto& sp = bs_.space();
    std::vector<double> rx(np), bz(np);
    for (std::size_t p = 0; p < np; ++p) {
      rx[p] = target.points()[p].x - base.points()[p].x;
      bz[p] = target.points()[p].z - base.points()[p].z;
    }
    auto x_error = [&](double d_le, double d_te) {
      const auto shift = bs_.sweep_shift(d_le, d_te);
      double s = 0.0;
      for (std::size_t p = 0; p < np; ++p) s += (rx[p] - shift[p]) * (rx[p] - shift[p]);
      return s;
    };
    std::vector<double> x(sp.dim(), 0.0);
    for (int round = 0; round < options.bspline_rounds; ++round) {
      const auto z = box_least_squares(bs_.z_weights(), np, nz, bz,
                                       std::span<const double>(sp.lower).subspan(2),
                                       std::span<const double>(sp.upper).subspan(2));
      std::copy(z.begin(), z.end(), x.begin() + 2);
      x[0] = golden(sp.lower[0], sp.upper[0], [&](double v) { return x_error(v, x[1]); });
      x[1] = golden(sp.lower[1], sp.upper[1], [&](double v) { return x_error(x[0], v); });
    }
    return finish(param, std::move(x), target);
  }

 private:
  template <typename F>
  double golden(double lo, double hi, F f) const {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > options.golden_tolerance_deg) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - r * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + r * (b - a);
        fd = f(d);
      }
    }
    // The interval ends are candidates too, so a minimum on the bound is kept.
    double best = 0.5 * (a + b), fbest = f(best);
    for (double v : {lo, hi}) {
      const double fv = f(v);
      if (fv < fbest) {
        best = v;
        fbest = fv;
      }
    }
    return best;
  }

  const param::BsplineParameterization& bs_;
};

// Mean squared error of the generator surface is quadratic in the control
// offsets: |o M + c|^2 / P with c = base - target, so the fit works with the
// Gram matrix G = M M^T and h = M c^T instead of full surfaces.
class GanFitter final : public Fitter::Impl {
 public:
  GanFitter(const param::GanParameterization& p, FitOptions o) : Impl(p, o), gan_(p) {
    const auto& m = gan_.generator().ffd.full_map.value();
    const Eigen::Map<const RowMatrix> mm(m.data.data(), static_cast<Eigen::Index>(m.rows),
                                         static_cast<Eigen::Index>(m.cols));
    const RowMatrix g = mm * mm.transpose();
    gram_ = ad::constant(ad::Tensor(m.rows, m.rows, std::vector<double>(g.data(), g.data() + g.size())));
  }

  FitResult fit(const SurfaceGrid& target, std::uint64_t stream) const override {
    const auto& gen = gan_.generator();
    require_same_grid(gen.ffd.base, target);
    const std::size_t dz = gen.latent_dim, np = target.size();
    const auto& m = gen.ffd.full_map.value();
    const auto& base = gen.ffd.full_base.value();
    const std::size_t width = m.cols, lp2 = m.rows;
    std::vector<double> c(width);
    for (std::size_t p = 0; p < np; ++p) {
      const Point3& t = target.points()[p];
      c[3 * p] = base.data[3 * p] - t.x;
      c[3 * p + 1] = base.data[3 * p + 1] - t.y;
      c[3 * p + 2] = base.data[3 * p + 2] - t.z;
    }
    const Eigen::Map<const RowMatrix> mm(m.data.data(), static_cast<Eigen::Index>(lp2),
                                         static_cast<Eigen::Index>(width));
    const Eigen::Map<const Eigen::VectorXd> cv(c.data(), static_cast<Eigen::Index>(width));
    const Eigen::VectorXd h = mm * cv;
    const double cc = cv.squaredNorm();
    const ad::Var hv = ad::constant(ad::Tensor(lp2, 1, std::vector<double>(h.data(), h.data() + h.size())));
    const double inv_p = 1.0 / static_cast<double>(np);

    // Starts: z = 0 then LHS points mapped to [-1, 1].
    Rng rng = Rng::derive(options.seed, stream, kRestartSalt);
    const std::size_t restarts = static_cast<std::size_t>(std::max(0, options.gan_restarts));
    const auto lhs = bo::lhs_sample(restarts, dz, rng);
    const std::size_t b = restarts + 1;
    ad::Tensor z(b, dz, 0.0);
    for (std::size_t r = 0; r < restarts; ++r) {
      for (std::size_t k = 0; k < dz; ++k) z(r + 1, k) = 2.0 * lhs[r][k] - 1.0;
    }

    // Lowest-MSE iterate of each restart.
    std::vector<double> row_best(b, std::numeric_limits<double>::infinity());
    ad::Tensor row_z = z;
    bool warned = false;
    auto row_losses = [&](const ad::Var& off, const ad::Var& quad) {
      // per row: off G off^T + 2 off h + |c|^2
      std::vector<double> out(b);
      const auto oh = ad::matmul(off, hv);
      for (std::size_t i = 0; i < b; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < lp2; ++j) s += quad.value()(i, j) * off.value()(i, j);
        out[i] = std::max(0.0, (s + 2.0 * oh.value()(i, 0) + cc) * inv_p);
      }
      return out;
    };
    auto track = [&](const std::vector<double>& losses) {
      for (std::size_t i = 0; i < b; ++i) {
        if (!std::isfinite(losses[i])) {
          warned = true;
          continue;
        }
        if (losses[i] < row_best[i]) {
          row_best[i] = losses[i];
          for (std::size_t k = 0; k < dz; ++k) row_z(i, k) = z(i, k);
        }
      }
    };

    std::vector<double> m1(z.size(), 0.0), m2(z.size(), 0.0);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    for (int step = 0; step < options.gan_steps; ++step) {
      const ad::Var zv = ad::parameter(z);
      const ad::Var off = gen.offsets(zv);
      const ad::Var quad = ad::matmul(off, gram_);
      const ad::Var loss = ad::scale(
          ad::add(ad::sum(ad::mul(quad, off)), ad::scale(ad::sum(ad::matmul(off, hv)), 2.0)), inv_p);
      track(row_losses(off, quad));
      const ad::Var gz = ad::grad(loss, std::span<const ad::Var>(&zv, 1))[0];
      const double t = static_cast<double>(step + 1);
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double g = gz.value().data[i];
        if (!std::isfinite(g)) {
          warned = true;
          continue;
        }
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
        const double mh = m1[i] / (1.0 - std::pow(beta1, t));
        const double vh = m2[i] / (1.0 - std::pow(beta2, t));
        z.data[i] = std::clamp(z.data[i] - options.gan_learning_rate * mh / (std::sqrt(vh) + eps),
                               -1.0, 1.0);
      }
    }
    {
      ad::NoGradGuard guard;
      const ad::Var off = gen.offsets(ad::constant(z));
      track(row_losses(off, ad::matmul(off, gram_)));
    }
    // The restart kept is the one closest to the target in Hausdorff
    // distance, the coverage metric; z = 0 is always a candidate.
    FitResult r = finish(param, std::vector<double>(dz, 0.0), target);
    for (std::size_t i = 0; i < b; ++i) {
      if (!std::isfinite(row_best[i])) continue;
      FitResult c = finish(param, std::vector<double>(&row_z(i, 0), &row_z(i, 0) + dz), target);
      if (c.hausdorff < r.hausdorff || (c.hausdorff == r.hausdorff && c.mse < r.mse)) r = std::move(c);
    }
    if (warned) {
      r.warning = true;
      r.message = "non-finite loss or gradient during latent descent";
    }
    return r;
  }

 private:
  const param::GanParameterization& gan_;
  ad::Var gram_;
};

}  // namespace

Fitter::Fitter(const param::Parameterization& param, FitOptions options) {
  if (const auto* p = dynamic_cast<const param::FfdParameterization*>(&param)) {
    impl_ = std::make_unique<FfdFitter>(*p, options);
  } else if (const auto* p = dynamic_cast<const param::BsplineParameterization*>(&param)) {
    impl_ = std::make_unique<BsplineFitter>(*p, options);
  } else if (const auto* p = dynamic_cast<const param::GanParameterization*>(&param)) {
    impl_ = std::make_unique<GanFitter>(*p, options);
  } else {
    throw ArgumentError("fit: unsupported parameterization '" + param.kind() + "'");
  }
}

Fitter::~Fitter() = default;

FitResult Fitter::fit(const SurfaceGrid& target, std::uint64_t stream) const {
  try {
    return impl_->fit(target, stream);
  } catch (const NumericError& e) {
    FitResult r = finish(impl_->param, std::vector<double>(impl_->param.space().dim(), 0.0), target);
    r.warning = true;
    r.message = e.what();
    return r;
  }
}

FitResult fit_target(const param::Parameterization& param, const SurfaceGrid& target,
                     const FitOptions& options) {
  return Fitter(param, options).fit(target);
}

std::vector<FitRow> coverage(const param::Parameterization& param, const std::string& name,
                             std::span<const SurfaceGrid> targets, const FitOptions& options,
                             unsigned threads) {
  const Fitter fitter(param, options);
  std::vector<FitRow> rows(targets.size());
  parallel_for(targets.size(), threads, [&](std::size_t i) {
    const FitResult r = fitter.fit(targets[i], i);
    rows[i] = {i, name, param.space().dim(), r.mse, r.hausdorff, r.warning};
  });
  return rows;
}

void write_fit_csv(const std::filesystem::path& path, std::span<const FitRow> rows) {
  const std::vector<std::string> header{"target_id", "param_name", "dims", "mse", "hausdorff", "warning"};
  io::CsvWriter csv(path, header);
  for (const auto& r : rows) {
    csv.cell(static_cast<std::int64_t>(r.target_id))
        .cell(r.param_name)
        .cell(static_cast<std::int64_t>(r.dims))
        .cell(r.mse)
        .cell(r.hausdorff)
        .cell(static_cast<std::int64_t>(r.warning));
    csv.end_row();
  }
  csv.close();
}

// -------------------------------------------------------- feasibility ----

FeasibilitySummary feasibility_ratio(const param::Parameterization& param, std::size_t n_samples,
                                     Rng& rng, unsigned threads) {
  if (n_samples == 0) throw ArgumentError("feasibility_ratio: need at least one sample");
  const std::uint64_t run_seed = rng.next_u64();
  const auto& space = param.space();
  FeasibilitySummary s;
  s.samples = n_samples;
  s.log.resize(n_samples);
  parallel_for(n_samples, threads, [&](std::size_t i) {
    Rng r = Rng::derive(run_seed, i, kSampleSalt);
    std::vector<double> u(space.dim());
    for (double& v : u) v = r.uniform();
    FeasibilitySample& out = s.log[i];
    out.sample_id = i;
    out.CL = out.LD = std::numeric_limits<double>::quiet_NaN();
    try {
      const auto rep = aero::feasibility_report(param.decode(space.from_unit(u)));
      out.geometric_ok = rep.geometric_ok;
      out.CL = rep.CL;
      out.LD = rep.LD;
      out.feasible = rep.feasible;
    } catch (const std::exception&) {
    }
  });
  for (const auto& l : s.log) s.feasible += l.feasible ? 1 : 0;
  const double n = static_cast<double>(n_samples);
  s.ratio = static_cast<double>(s.feasible) / n;
  s.half_width = 1.96 * std::sqrt(s.ratio * (1.0 - s.ratio) / n);
  return s;
}

void write_feasibility_csv(const std::filesystem::path& path, const FeasibilitySummary& summary) {
  const std::vector<std::string> header{"sample_id", "geometric_ok", "CL", "LD", "feasible"};
  io::CsvWriter csv(path, header);
  for (const auto& l : summary.log) {
    csv.cell(static_cast<std::int64_t>(l.sample_id))
        .cell(static_cast<std::int64_t>(l.geometric_ok))
        .cell(l.CL)
        .cell(l.LD)
        .cell(static_cast<std::int64_t>(l.feasible));
    csv.end_row();
  }
  csv.close();
}

// ----------------------------------------------------------- traverse ----

std::vector<SurfaceGrid> latent_traverse(const nn::GeneratorNet& generator, std::size_t dim,
                                         std::size_t steps, std::span<const double> others) {
  if (dim >= generator.latent_dim) throw ArgumentError("latent_traverse: dimension out of range");
  if (steps < 2) throw ArgumentError("latent_traverse: need at least two steps");
  if (others.size() != generator.latent_dim) {
    throw ArgumentError("latent_traverse: fixed latent vector has the wrong size");
  }
  std::vector<double> z(others.begin(), others.end());
  std::vector<SurfaceGrid> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    z[dim] = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(steps - 1);
    out.push_back(generator.decode(z));
  }
  return out;
}

// ----------------------------------------------------------- parallel ----

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n || error) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ffdgan::harness
