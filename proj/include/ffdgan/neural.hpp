#pragma once

// FFD-GAN networks and WGAN-GP training. The generator maps a latent vector
// through dense layers to control-point offsets and then through a fixed FFD
// layer to surface points; the critic scores (subsampled) surface grids.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ffdgan/autodiff.hpp"
#include "ffdgan/geometry.hpp"
#include "ffdgan/rng.hpp"

namespace ffdgan::nn {

struct Dense {
  ad::Var weight;  // inputs x outputs
  ad::Var bias;    // 1 x outputs
};

// Dense layers with leaky ReLU between them and a linear final layer.
struct Mlp {
  std::vector<Dense> layers;
  double slope = 0.2;

  static Mlp init(std::span<const std::size_t> widths, double slope, Rng& rng);
  ad::Var forward(const ad::Var& x) const;
  // Inference-only pass that reports the first layer producing a non-finite
  // activation.
  ad::Tensor evaluate(const ad::Tensor& x) const;
  std::vector<ad::Var> parameters() const;
  std::vector<std::size_t> widths() const;
  std::size_t input_size() const;
  std::size_t output_size() const;
};

// Linear map from control-point offsets (x block then z block) to flattened
// surface coordinates, for the full grid and for the critic's subsample.
struct FfdLayer {
  geom::LatticeDims dims;
  double inflation = 0.05;
  std::size_t stride = 8;
  geom::SurfaceGrid base;  // mean shape
  geom::ControlLattice lattice;
  ad::Var full_map;        // 2L x 3MN, constant
  ad::Var full_base;       // 1 x 3MN
  ad::Var sub_map;         // 2L x 3D
  ad::Var sub_base;        // 1 x 3D
  std::vector<std::size_t> sub_points;  // flat grid indices seen by the critic

  static FfdLayer build(const geom::SurfaceGrid& base, const geom::LatticeDims& dims,
                        double inflation, std::size_t stride);
  std::size_t lattice_points() const { return dims.count(); }
};

// Grid points kept by the critic: every section, every `stride`-th point of
// each section, excluding the duplicated closing point.
std::vector<std::size_t> subsample_indices(std::size_t sections, std::size_t per_section,
                                           std::size_t stride);
// Rows of flattened (x, y, z) coordinates at `indices` for each grid.
ad::Tensor flatten_grids(std::span<const geom::SurfaceGrid> grids,
                         std::span<const std::size_t> indices);

struct GeneratorNet {
  Mlp mlp;
  FfdLayer ffd;
  std::size_t latent_dim = 0;
  bool trained = false;

  // B x d_z -> B x 2L offsets.
  ad::Var offsets(const ad::Var& z) const;
  ad::Var surface(const ad::Var& offsets) const;      // B x 3MN
  ad::Var surface_sub(const ad::Var& offsets) const;  // B x 3D
  // Offsets per control point (y zero) and the deformed grid.
  std::pair<std::vector<geom::Point3>, geom::SurfaceGrid> forward(std::span<const double> z) const;
  geom::SurfaceGrid decode(std::span<const double> z) const;
};

struct DiscriminatorNet {
  Mlp mlp;
  ad::Var score(const ad::Var& x) const { return mlp.forward(x); }
};

struct TrainConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double adam_epsilon = 1e-8;
  int critic_iterations = 5;
  std::size_t batch_size = 64;
  int iterations = 2000;
  double gamma1 = 10.0;
  double gamma2 = 1.0;
  std::size_t latent_dim = 15;
  std::uint64_t seed = 0;
  geom::LatticeDims lattice{3, 7, 1};
  double inflation = 0.05;
  std::vector<std::size_t> generator_hidden{256, 256};
  std::vector<std::size_t> critic_hidden{512, 256};
  double slope = 0.2;
  std::size_t critic_stride = 8;
  int checkpoint_every = 0;  // generator iterations; 0 disables
  std::filesystem::path checkpoint_path;

  void validate() const;
};

struct CriticLoss {
  ad::Var loss;
  double wasserstein = 0.0;  // mean D(real) - mean D(fake)
  double r1 = 0.0;
  double mean_grad_norm = 0.0;
};

struct GeneratorLoss {
  ad::Var loss;
  double r2 = 0.0;
};

// Critic objective with the gradient penalty on eps*real + (1-eps)*fake.
// `eps` is B x 1.
CriticLoss critic_loss(const DiscriminatorNet& d, const ad::Var& real, const ad::Var& fake,
                       const ad::Tensor& eps, double gamma1);
// -mean D(fake) + gamma2 * sum(offsets^2) / (B * lattice_points).
GeneratorLoss generator_loss(const DiscriminatorNet& d, const ad::Var& offsets,
                             const ad::Var& fake, double gamma2, std::size_t lattice_points);
double offset_penalty(const ad::Tensor& offsets, std::size_t lattice_points);

struct GanLosses {
  double loss_d = 0.0;
  double loss_g = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
};
GanLosses wgan_gp_losses(const GeneratorNet& g, const DiscriminatorNet& d, const ad::Tensor& real,
                         const ad::Tensor& z, const ad::Tensor& eps, const TrainConfig& config);

struct AdamState {
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  std::int64_t step = 0;
};

void adam_step(std::span<ad::Var> params, std::span<const ad::Var> grads, AdamState& state,
               double lr, double beta1, double beta2, double epsilon);

struct HistoryRow {
  int iteration = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double wasserstein = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  GeneratorNet generator;
  DiscriminatorNet critic;
  std::vector<HistoryRow> history;
};

using ProgressFn = std::function<void(const HistoryRow&)>;

// `train_set` must be aligned grids of identical size. The mean shape (rounded
// to float32) becomes the FFD base; weights are rounded to float32 at the end
// so a saved checkpoint reproduces the in-memory generator exactly.
TrainResult train(std::span<const geom::SurfaceGrid> train_set, const TrainConfig& config,
                  const ProgressFn& progress = {});

// Mean critic input-gradient norm over a fresh interpolate batch.
double critic_gradient_norm(const GeneratorNet& g, const DiscriminatorNet& d,
                            std::span<const geom::SurfaceGrid> real, std::size_t batch, Rng& rng);

// Checkpoint: the line "FFDGAN-CHECKPOINT 1", an 8-byte little-endian header
// length, a JSON header (architecture, config, iteration, block table), then
// little-endian float32 blocks in table order.
void save_checkpoint(const std::filesystem::path& path, const GeneratorNet& g,
                     const DiscriminatorNet* d, const TrainConfig& config, int iteration);
struct Checkpoint {
  GeneratorNet generator;
  DiscriminatorNet critic;
  bool has_critic = false;
  TrainConfig config;
  int iteration = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ffdgan::nn
