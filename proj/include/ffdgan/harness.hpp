#pragma once

// Evaluation procedures: fitting targets with a parameterization (coverage),
// Monte-Carlo feasibility ratio, and latent traversals.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ffdgan/geometry.hpp"
#include "ffdgan/neural.hpp"
#include "ffdgan/parameterization.hpp"
#include "ffdgan/rng.hpp"

namespace ffdgan::harness {

struct FitOptions {
  int bspline_rounds = 5;
  double golden_tolerance_deg = 1e-7;
  int gan_steps = 200;
  int gan_restarts = 10;  // LHS starts, plus z = 0
  double gan_learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct FitResult {
  std::vector<double> x;
  double mse = 0.0;
  double hausdorff = 0.0;
  bool warning = false;
  std::string message;
};

// min ||A x - b||^2 over lower <= x <= upper: unconstrained solve, clip, one
// re-solve of the free variables with the clipped ones held, clip again.
// `a` is row-major rows x cols.
std::vector<double> box_least_squares(std::span<const double> a, std::size_t rows,
                                      std::size_t cols, std::span<const double> b,
                                      std::span<const double> lower,
                                      std::span<const double> upper);

// Minimizes mean squared point distance to `target` over the design space.
// Quantities that depend only on the parameterization are computed once.
class Fitter {
 public:
  explicit Fitter(const param::Parameterization& param, FitOptions options = {});
  ~Fitter();
  Fitter(const Fitter&) = delete;
  Fitter& operator=(const Fitter&) = delete;

  // `stream` selects the restart stream so targets can be fitted in any order.
  FitResult fit(const geom::SurfaceGrid& target, std::uint64_t stream = 0) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

FitResult fit_target(const param::Parameterization& param, const geom::SurfaceGrid& target,
                     const FitOptions& options = {});

struct FitRow {
  std::size_t target_id = 0;
  std::string param_name;
  std::size_t dims = 0;
  double mse = 0.0;
  double hausdorff = 0.0;
  bool warning = false;
};

// Fits every target (ids are positions in `targets`); rows in target order.
// `threads` = 0 uses the hardware concurrency.
std::vector<FitRow> coverage(const param::Parameterization& param, const std::string& name,
                             std::span<const geom::SurfaceGrid> targets,
                             const FitOptions& options, unsigned threads = 0);
void write_fit_csv(const std::filesystem::path& path, std::span<const FitRow> rows);

struct FeasibilitySample {
  std::size_t sample_id = 0;
  bool geometric_ok = false;
  double CL = 0.0;
  double LD = 0.0;
  bool feasible = false;
};

struct FeasibilitySummary {
  std::size_t samples = 0;
  std::size_t feasible = 0;
  double ratio = 0.0;
  double half_width = 0.0;  // 95% normal-approximation binomial interval
  std::vector<FeasibilitySample> log;
};

// Uniform samples over the design box, each from its own stream derived from
// one draw of `rng`. Decode failures count as infeasible.
FeasibilitySummary feasibility_ratio(const param::Parameterization& param,
                                     std::size_t n_samples, Rng& rng, unsigned threads = 0);
void write_feasibility_csv(const std::filesystem::path& path, const FeasibilitySummary& summary);

// z[dim] swept linearly over [-1, 1] in `steps` shapes, other entries from
// `others`.
std::vector<geom::SurfaceGrid> latent_traverse(const nn::GeneratorNet& generator, std::size_t dim,
                                               std::size_t steps, std::span<const double> others);

// Calls fn(i) for i in [0, n) on up to `threads` workers. The first exception
// thrown is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace ffdgan::harness
