#pragma once

// Latin hypercube designs, Gaussian-process regression, GP-UCB suggestions,
// and the lift-to-drag shape optimization loop built on them.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ffdgan/parameterization.hpp"
#include "ffdgan/rng.hpp"

namespace ffdgan::bo {

using Point = std::vector<double>;

// n points in [0, 1)^dims; every axis has exactly one point in each bin
// [k/n, (k+1)/n).
std::vector<Point> lhs_sample(std::size_t n, std::size_t dims, Rng& rng);

struct GpOptions {
  double jitter = 1e-6;
  double max_jitter = 1e-2;
  int length_grid = 16;
  double min_length = 0.02;  // times sqrt(dims)
  double max_length = 2.0;   // times sqrt(dims)
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

// Squared-exponential kernel sigma2 * exp(-|a - b|^2 / (2 l^2)) on unit-cube
// inputs, observations standardized to zero mean and unit variance. Each fit
// picks l from a log grid by marginal likelihood with sigma2 profiled out.
class GpModel {
 public:
  explicit GpModel(GpOptions options = {});

  void fit(std::span<const Point> x, std::span<const double> y);
  GpPrediction predict(std::span<const double> q) const;

  std::size_t observations() const { return x_.size(); }
  double length_scale() const { return length_; }
  // Prior variance in the units of y.
  double prior_variance() const { return sigma2_ * y_scale_ * y_scale_; }
  double jitter() const { return jitter_used_; }
  double log_marginal_likelihood() const { return lml_; }

 private:
  GpOptions options_;
  std::vector<Point> x_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  double length_ = 1.0;
  double sigma2_ = 1.0;
  double jitter_used_ = 0.0;
  double lml_ = 0.0;
  std::vector<double> chol_;   // lower factor of R + jitter I, row-major
  std::vector<double> alpha_;  // (R + jitter I)^-1 y_standardized
  std::size_t dims_ = 0;
};

struct UcbOptions {
  double kappa = 2.0;
  std::size_t candidates = 1024;
  bool refine = true;
};

// Maximizes mean + kappa * stdev over [0, 1]^dims: the best of `candidates`
// uniform points (the first draws of `rng`), then coordinate steps of
// halving size while they improve.
Point ucb_suggest(const GpModel& model, std::size_t dims, const UcbOptions& options, Rng& rng);
double ucb_score(const GpModel& model, std::span<const double> q, double kappa);

struct MaximizeResult {
  std::vector<Point> points;
  std::vector<double> values;
  std::size_t best = 0;  // index of the largest value
};

// Plain GP-UCB on [0, 1]^dims: n_init LHS points, then suggestions until
// n_total evaluations.
MaximizeResult maximize(const std::function<double(const Point&)>& objective, std::size_t dims,
                        std::size_t n_init, std::size_t n_total, double kappa, std::uint64_t seed);

struct OptBudget {
  std::size_t n_init = 10;
  std::size_t n_seq = 90;
  double kappa = 2.0;
  double alpha_min_deg = -5.0;
  double alpha_max_deg = 10.0;
  double mach = 0.4;

  void validate() const;
};

struct Evaluation {
  std::size_t iteration = 0;  // 1-based
  std::string phase;          // "lhs" or "ucb"
  Point unit;                 // design variables then alpha, in [0, 1]
  Point x;                    // design variables
  double alpha_deg = 0.0;
  bool feasible = false;
  double CL = 0.0;
  double CD = 0.0;
  double LD = 0.0;
  double score = 0.0;         // LD, or the penalty when infeasible
  double best_so_far = 0.0;   // running maximum of score
  std::string note;
};

struct OptState {
  std::string param_kind;
  std::size_t dims = 0;  // design variables + 1
  std::uint64_t seed = 0;
  OptBudget budget;
  std::string rng_state;
  std::vector<Evaluation> history;
};

// Decodes, re-aligns the root chord to 0 degrees, and solves the lifting line
// at the requested angle. Geometric or solver failure gives feasible = false.
Evaluation evaluate_design(const param::Parameterization& param, std::span<const double> unit,
                           const OptBudget& budget);

using EvalCallback = std::function<void(const OptState&)>;

// n_init LHS evaluations then GP-UCB evaluations until the budget is used.
// Infeasible designs score (lowest score so far) - 1. Starting from a
// non-empty `state` (a loaded checkpoint) continues that run. `on_eval` sees
// the state after every evaluation.
OptState optimize_shape(const param::Parameterization& param, const OptBudget& budget,
                        std::uint64_t seed, std::optional<OptState> resume = std::nullopt,
                        const EvalCallback& on_eval = {});

void write_history_csv(const std::filesystem::path& path, const OptState& state);
void save_opt_state(const std::filesystem::path& path, const OptState& state);
OptState load_opt_state(const std::filesystem::path& path);

}  // namespace ffdgan::bo
