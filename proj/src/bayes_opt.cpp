#include "ffdgan/bayes_opt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "ffdgan/aero.hpp"
#include "ffdgan/errors.hpp"
#include "ffdgan/geometry.hpp"
#include "ffdgan/io.hpp"

namespace ffdgan::bo {

namespace {

constexpr std::uint64_t kLhsSalt = 0x6c6873;  // "lhs"
constexpr std::uint64_t kUcbSalt = 0x756362;  // "ucb"

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

}  // namespace

std::vector<Point> lhs_sample(std::size_t n, std::size_t dims, Rng& rng) {
  if (n == 0) throw ArgumentError("lhs_sample: n must be positive");
  std::vector<Point> out(n, Point(dims));
  std::vector<std::size_t> perm(n);
  const double nd = static_cast<double>(n);
  for (std::size_t d = 0; d < dims; ++d) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(perm[i], perm[j]);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double lo = static_cast<double>(perm[k]) / nd;
      const double hi = static_cast<double>(perm[k] + 1) / nd;
      double v = lo + rng.uniform() * (hi - lo);
      if (v >= hi) v = std::nextafter(hi, lo);
      out[k][d] = v;
    }
  }
  return out;
}

// ------------------------------------------------------------------ GP ----

GpModel::GpModel(GpOptions options) : options_(options) {}

void GpModel::fit(std::span<const Point> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("gp: input and value counts differ");
  const std::size_t n = x.size();
  x_.assign(x.begin(), x.end());
  dims_ = n > 0 ? x_[0].size() : 0;
  for (const auto& p : x_) {
    if (p.size() != dims_) throw ArgumentError("gp: inputs have different dimensions");
  }
  y_mean_ = 0.0;
  y_scale_ = 1.0;
  sigma2_ = 1.0;
  length_ = 1.0;
  chol_.clear();
  alpha_.clear();
  jitter_used_ = 0.0;
  lml_ = 0.0;
  if (n == 0) return;

  for (double v : y) y_mean_ += v;
  y_mean_ /= static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += (v - y_mean_) * (v - y_mean_);
  var /= static_cast<double>(n);
  y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  Eigen::VectorXd ys(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) ys[static_cast<Eigen::Index>(i)] = (y[i] - y_mean_) / y_scale_;

  std::vector<double> d2(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d2[i * n + j] = squared_distance(x_[i], x_[j]);
  }
  const double root_d = std::sqrt(static_cast<double>(std::max<std::size_t>(dims_, 1)));
  const double lmin = options_.min_length * root_d, lmax = options_.max_length * root_d;
  const int grid = std::max(1, options_.length_grid);
  bool found = false;
  const auto ni = static_cast<Eigen::Index>(n);
  for (int g = 0; g < grid; ++g) {
    const double t = grid == 1 ? 0.0 : static_cast<double>(g) / (grid - 1);
    const double ell = lmin * std::pow(lmax / lmin, t);
    Eigen::MatrixXd r(ni, ni);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            std::exp(-d2[i * n + j] / (2.0 * ell * ell));
      }
    }
    for (double jit = options_.jitter; jit <= options_.max_jitter * (1.0 + 1e-9); jit *= 10.0) {
      Eigen::MatrixXd rj = r;
      rj.diagonal().array() += jit;
      const Eigen::LLT<Eigen::MatrixXd> llt(rj);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::MatrixXd l = llt.matrixL();
      if ((l.diagonal().array() <= 0.0).any()) continue;
      const Eigen::VectorXd a = llt.solve(ys);
      double s2 = ys.dot(a) / static_cast<double>(n);
      if (!(s2 > 1e-12)) s2 = 1.0;
      const double lml = -0.5 * static_cast<double>(n) * std::log(s2) -
                         l.diagonal().array().log().sum() -
                         0.5 * static_cast<double>(n) * (1.0 + std::log(2.0 * M_PI));
      if (std::isfinite(lml) && (!found || lml > lml_)) {
        found = true;
        lml_ = lml;
        length_ = ell;
        sigma2_ = s2;
        jitter_used_ = jit;
        chol_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j <= i; ++j) {
            chol_[i * n + j] = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          }
        }
        alpha_.assign(a.data(), a.data() + n);
      }
      break;
    }
  }
  if (!found) throw SolverError("gp: kernel matrix not positive definite at the largest jitter");
}

GpPrediction GpModel::predict(std::span<const double> q) const {
  const std::size_t n = x_.size();
  if (n == 0) return {y_mean_, sigma2_ * y_scale_ * y_scale_};
  if (q.size() != dims_) throw ArgumentError("gp: query dimension mismatch");
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = std::exp(-squared_distance(q, x_[i]) / (2.0 * length_ * length_));
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += r[i] * alpha_[i];
  // v = L^-1 r by forward substitution
  double vv = 0.0;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = r[i];
    for (std::size_t j = 0; j < i; ++j) s -= chol_[i * n + j] * v[j];
    v[i] = s / chol_[i * n + i];
    vv += v[i] * v[i];
  }
  const double var = std::max(0.0, sigma2_ * (1.0 - vv));
  return {y_mean_ + y_scale_ * mean, var * y_scale_ * y_scale_};
}

// ----------------------------------------------------------------- UCB ----

double ucb_score(const GpModel& model, std::span<const double> q, double kappa) {
  const auto p = model.predict(q);
  return p.mean + kappa * std::sqrt(p.variance);
}

Point ucb_suggest(const GpModel& model, std::size_t dims, const UcbOptions& options, Rng& rng) {
  if (dims == 0) throw ArgumentError("ucb_suggest: zero dimensions");
  const std::size_t count = std::max<std::size_t>(1, options.candidates);
  Point best(dims), cand(dims);
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < count; ++c) {
    for (double& v : cand) v = rng.uniform();
    const double s = ucb_score(model, cand, options.kappa);
    if (s > best_score) {
      best_score = s;
      best = cand;
    }
  }
  if (!options.refine) return best;
  double step = 0.1;
  for (int pass = 0; pass < 60 && step >= 1e-3; ++pass) {
    bool improved = false;
    for (std::size_t d = 0; d < dims; ++d) {
      for (double sign : {1.0, -1.0}) {
        Point q = best;
        q[d] = std::clamp(q[d] + sign * step, 0.0, 1.0);
        if (q[d] == best[d]) continue;
        const double s = ucb_score(model, q, options.kappa);
        if (s > best_score) {
          best_score = s;
          best = std::move(q);
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

MaximizeResult maximize(const std::function<double(const Point&)>& objective, std::size_t dims,
                        std::size_t n_init, std::size_t n_total, double kappa, std::uint64_t seed) {
  if (n_init < 1 || n_total < n_init) throw ArgumentError("maximize: invalid budget");
  Rng lhs_rng = Rng::derive(seed, 0, kLhsSalt);
  Rng rng = Rng::derive(seed, 1, kUcbSalt);
  MaximizeResult r;
  r.points = lhs_sample(n_init, dims, lhs_rng);
  for (const auto& p : r.points) r.values.push_back(objective(p));
  while (r.points.size() < n_total) {
    GpModel gp;
    gp.fit(r.points, r.values);
    r.points.push_back(ucb_suggest(gp, dims, UcbOptions{kappa, 1024, true}, rng));
    r.values.push_back(objective(r.points.back()));
  }
  r.best = static_cast<std::size_t>(std::max_element(r.values.begin(), r.values.end()) - r.values.begin());
  return r;
}

// ------------------------------------------------------- optimization ----

void OptBudget::validate() const {
  if (n_init < 2) throw ArgumentError("budget: n_init must be at least 2");
  if (!(alpha_max_deg > alpha_min_deg)) throw ArgumentError("budget: empty angle-of-attack range");
  if (!(kappa >= 0.0)) throw ArgumentError("budget: kappa must be non-negative");
}

Evaluation evaluate_design(const param::Parameterization& param, std::span<const double> unit,
                           const OptBudget& budget) {
  const std::size_t d = param.space().dim();
  if (unit.size() != d + 1) throw ArgumentError("evaluate_design: expected design variables plus alpha");
  Evaluation e;
  e.unit.assign(unit.begin(), unit.end());
  e.x = param.space().from_unit(unit.first(d));
  e.alpha_deg = budget.alpha_min_deg + (budget.alpha_max_deg - budget.alpha_min_deg) * unit[d];
  e.CL = e.CD = e.LD = std::numeric_limits<double>::quiet_NaN();
  try {
    const geom::SurfaceGrid grid = param.decode(e.x);
    if (geom::self_intersection_check(grid)) {
      e.note = "self-intersecting";
      return e;
    }
    const auto r = aero::lifting_line_solve(geom::align(grid),
                                            aero::FlowCondition{budget.mach, e.alpha_deg, false});
    if (!std::isfinite(r.LD)) {
      e.note = "non-finite lift-to-drag";
      return e;
    }
    e.CL = r.CL;
    e.CD = r.CD();
    e.LD = r.LD;
    e.feasible = true;
  } catch (const std::exception& ex) {
    e.note = ex.what();
  }
  return e;
}

OptState optimize_shape(const param::Parameterization& param, const OptBudget& budget,
                        std::uint64_t seed, std::optional<OptState> resume,
                        const EvalCallback& on_eval) {
  budget.validate();
  const std::size_t dims = param.space().dim() + 1;
  OptState state;
  if (resume) {
    state = std::move(*resume);
    if (state.param_kind != param.kind() || state.dims != dims || state.seed != seed) {
      throw ArgumentError("optimize: checkpoint belongs to a different parameterization or seed");
    }
    if (state.budget.n_init != budget.n_init) {
      throw ArgumentError("optimize: checkpoint used a different initial design size");
    }
    state.budget = budget;
  } else {
    state.param_kind = param.kind();
    state.dims = dims;
    state.seed = seed;
    state.budget = budget;
    state.rng_state = Rng::derive(seed, 1, kUcbSalt).state();
  }
  Rng lhs_rng = Rng::derive(seed, 0, kLhsSalt);
  const auto design = lhs_sample(budget.n_init, dims, lhs_rng);
  Rng rng;
  rng.restore(state.rng_state);

  const std::size_t total = budget.n_init + budget.n_seq;
  while (state.history.size() < total) {
    const std::size_t i = state.history.size();
    Point unit;
    std::string phase = "lhs", note;
    if (i < budget.n_init) {
      unit = design[i];
    } else {
      phase = "ucb";
      std::vector<Point> xs;
      std::vector<double> ys;
      for (const auto& h : state.history) {
        xs.push_back(h.unit);
        ys.push_back(h.score);
      }
      GpModel gp;
      try {
        gp.fit(xs, ys);
        unit = ucb_suggest(gp, dims, UcbOptions{budget.kappa, 1024, true}, rng);
      } catch (const SolverError& ex) {
        unit.resize(dims);
        for (double& v : unit) v = rng.uniform();
        note = std::string("random point: ") + ex.what();
      }
      state.rng_state = rng.state();
    }
    Evaluation e = evaluate_design(param, unit, budget);
    e.iteration = i + 1;
    e.phase = phase;
    if (!note.empty()) e.note = e.note.empty() ? note : note + "; " + e.note;
    double lowest = std::numeric_limits<double>::infinity();
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& h : state.history) {
      lowest = std::min(lowest, h.score);
      best = std::max(best, h.score);
    }
    if (state.history.empty()) lowest = 0.0;
    e.score = e.feasible ? e.LD : lowest - 1.0;
    e.best_so_far = std::max(best, e.score);
    state.history.push_back(std::move(e));
    if (on_eval) on_eval(state);
  }
  return state;
}

// -------------------------------------------------------- persistence ----

void write_history_csv(const std::filesystem::path& path, const OptState& state) {
  const std::size_t d = state.dims > 0 ? state.dims - 1 : 0;
  std::vector<std::string> header{"iteration", "phase"};
  for (std::size_t k = 0; k < d; ++k) header.push_back("x" + std::to_string(k));
  for (const char* h : {"alpha_deg", "CL", "CD", "LD", "best_so_far", "score", "feasible"}) {
    header.emplace_back(h);
  }
  io::CsvWriter csv(path, header);
  for (const auto& e : state.history) {
    csv.cell(static_cast<std::int64_t>(e.iteration)).cell(e.phase);
    for (double v : e.x) csv.cell(v);
    csv.cell(e.alpha_deg).cell(e.CL).cell(e.CD).cell(e.LD).cell(e.best_so_far).cell(e.score);
    csv.cell(static_cast<std::int64_t>(e.feasible));
    csv.end_row();
  }
  csv.close();
}

namespace {

io::Json number(double v) { return std::isfinite(v) ? io::Json(v) : io::Json(nullptr); }

double number(const io::Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void save_opt_state(const std::filesystem::path& path, const OptState& state) {
  io::Json j;
  j["format"] = "ffdgan-bo";
  j["version"] = 1;
  j["param_kind"] = state.param_kind;
  j["dims"] = state.dims;
  j["seed"] = state.seed;
  j["budget"] = {{"n_init", state.budget.n_init},
                 {"n_seq", state.budget.n_seq},
                 {"kappa", state.budget.kappa},
                 {"alpha_min_deg", state.budget.alpha_min_deg},
                 {"alpha_max_deg", state.budget.alpha_max_deg},
                 {"mach", state.budget.mach}};
  j["rng_state"] = state.rng_state;
  io::Json hist = io::Json::array();
  for (const auto& e : state.history) {
    hist.push_back({{"iteration", e.iteration},
                    {"phase", e.phase},
                    {"unit", e.unit},
                    {"x", e.x},
                    {"alpha_deg", e.alpha_deg},
                    {"feasible", e.feasible},
                    {"CL", number(e.CL)},
                    {"CD", number(e.CD)},
                    {"LD", number(e.LD)},
                    {"score", e.score},
                    {"best_so_far", e.best_so_far},
                    {"note", e.note}});
  }
  j["history"] = std::move(hist);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  io::write_json(tmp, j);
  std::filesystem::rename(tmp, path);
}

OptState load_opt_state(const std::filesystem::path& path) {
  const io::Json j = io::read_json(path);
  try {
    if (j.at("format") != "ffdgan-bo" || j.at("version") != 1) {
      throw IoError("optimizer checkpoint: unsupported format in " + path.string());
    }
    OptState s;
    s.param_kind = j.at("param_kind").get<std::string>();
    s.dims = j.at("dims").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& b = j.at("budget");
    s.budget.n_init = b.at("n_init").get<std::size_t>();
    s.budget.n_seq = b.at("n_seq").get<std::size_t>();
    s.budget.kappa = b.at("kappa").get<double>();
    s.budget.alpha_min_deg = b.at("alpha_min_deg").get<double>();
    s.budget.alpha_max_deg = b.at("alpha_max_deg").get<double>();
    s.budget.mach = b.at("mach").get<double>();
    s.rng_state = j.at("rng_state").get<std::string>();
    for (const auto& h : j.at("history")) {
      Evaluation e;
      e.iteration = h.at("iteration").get<std::size_t>();
      e.phase = h.at("phase").get<std::string>();
      e.unit = h.at("unit").get<Point>();
      e.x = h.at("x").get<Point>();
      e.alpha_deg = h.at("alpha_deg").get<double>();
      e.feasible = h.at("feasible").get<bool>();
      e.CL = number(h.at("CL"));
      e.CD = number(h.at("CD"));
      e.LD = number(h.at("LD"));
      e.score = h.at("score").get<double>();
      e.best_so_far = h.at("best_so_far").get<double>();
      e.note = h.at("note").get<std::string>();
      s.history.push_back(std::move(e));
    }
    return s;
  } catch (const io::Json::exception& e) {
    throw IoError("optimizer checkpoint: malformed document " + path.string() + ": " + e.what());
  }
}

}  // namespace ffdgan::bo
