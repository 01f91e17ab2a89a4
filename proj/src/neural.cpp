#include "ffdgan/neural.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "ffdgan/errors.hpp"

namespace ffdgan::nn {

using ad::Tensor;
using ad::Var;
using geom::Point3;
using geom::SurfaceGrid;

namespace {

double round_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

void round_tensor(Tensor& t) {
  for (double& v : t.data) v = round_f32(v);
}

Tensor uniform_tensor(std::size_t r, std::size_t c, double lo, double hi, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

// ------------------------------------------------------------------ MLP ----

Mlp Mlp::init(std::span<const std::size_t> widths, double slope, Rng& rng) {
  if (widths.size() < 2) throw ArgumentError("Mlp: need at least input and output widths");
  Mlp net;
  net.slope = slope;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t in = widths[k], out = widths[k + 1];
    if (in == 0 || out == 0) throw ArgumentError("Mlp: zero layer width");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    net.layers.push_back({ad::parameter(uniform_tensor(in, out, -limit, limit, rng)),
                          ad::parameter(Tensor(1, out))});
  }
  return net;
}

Var Mlp::forward(const Var& x) const {
  Var h = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    h = ad::add_row(ad::matmul(h, layers[k].weight), layers[k].bias);
    if (k + 1 < layers.size()) h = ad::leaky_relu(h, slope);
  }
  return h;
}

Tensor Mlp::evaluate(const Tensor& x) const {
  ad::NoGradGuard guard;
  Var h = ad::constant(x);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    h = ad::add_row(ad::matmul(h, layers[k].weight), layers[k].bias);
    if (k + 1 < layers.size()) h = ad::leaky_relu(h, slope);
    for (double v : h.value().data) {
      if (!std::isfinite(v)) throw NumericError("non-finite activation in layer " + std::to_string(k));
    }
  }
  return h.value();
}

std::vector<Var> Mlp::parameters() const {
  std::vector<Var> out;
  for (const auto& layer : layers) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().weight.rows());
  for (const auto& layer : layers) w.push_back(layer.weight.cols());
  return w;
}

std::size_t Mlp::input_size() const { return layers.front().weight.rows(); }
std::size_t Mlp::output_size() const { return layers.back().weight.cols(); }

// ------------------------------------------------------------ FFD layer ----

std::vector<std::size_t> subsample_indices(std::size_t sections, std::size_t per_section,
                                           std::size_t stride) {
  if (stride == 0) throw ArgumentError("subsample_indices: stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < sections; ++s) {
    for (std::size_t t = 0; t + 1 < per_section; t += stride) out.push_back(s * per_section + t);
  }
  return out;
}

Tensor flatten_grids(std::span<const SurfaceGrid> grids, std::span<const std::size_t> indices) {
  Tensor out(grids.size(), 3 * indices.size());
  for (std::size_t b = 0; b < grids.size(); ++b) {
    const auto pts = grids[b].points();
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= pts.size()) throw ArgumentError("flatten_grids: index outside grid");
      const auto& p = pts[indices[k]];
      out(b, 3 * k) = p.x;
      out(b, 3 * k + 1) = p.y;
      out(b, 3 * k + 2) = p.z;
    }
  }
  return out;
}

FfdLayer FfdLayer::build(const SurfaceGrid& base, const geom::LatticeDims& dims, double inflation,
                         std::size_t stride) {
  base.validate();
  FfdLayer f;
  f.dims = dims;
  f.inflation = inflation;
  f.stride = stride;
  f.base = base;
  const auto box = geom::BoundingBox::of(base.points()).inflated(inflation);
  f.lattice = geom::base_lattice(box, dims.l, dims.m, dims.n);
  const auto coords = geom::param_coords(base, box);
  const auto weights = geom::ffd_weights(dims, coords);
  const std::vector<Point3> zero(f.lattice.points.size());
  const auto embedded = geom::ffd_deform(f.lattice, zero, coords);
  f.sub_points = subsample_indices(base.sections(), base.points_per_section(), stride);

  const std::size_t lp = f.lattice.points.size(), np = base.size();
  auto build_map = [&](std::span<const std::size_t> rows, Var& map, Var& row) {
    Tensor m(2 * lp, 3 * rows.size());
    Tensor b(1, 3 * rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t p = rows[k];
      for (std::size_t q = 0; q < lp; ++q) {
        const double w = weights[p * lp + q];
        m(q, 3 * k) = w;
        m(lp + q, 3 * k + 2) = w;
      }
      const auto& e = embedded.points()[p];
      b(0, 3 * k) = e.x;
      b(0, 3 * k + 1) = e.y;
      b(0, 3 * k + 2) = e.z;
    }
    map = ad::constant(std::move(m));
    row = ad::constant(std::move(b));
  };
  std::vector<std::size_t> all(np);
  for (std::size_t p = 0; p < np; ++p) all[p] = p;
  build_map(all, f.full_map, f.full_base);
  build_map(f.sub_points, f.sub_map, f.sub_base);
  return f;
}

// ------------------------------------------------------------ generator ----

Var GeneratorNet::offsets(const Var& z) const { return mlp.forward(z); }

Var GeneratorNet::surface(const Var& off) const {
  return ad::add_row(ad::matmul(off, ffd.full_map), ffd.full_base);
}

Var GeneratorNet::surface_sub(const Var& off) const {
  return ad::add_row(ad::matmul(off, ffd.sub_map), ffd.sub_base);
}

std::pair<std::vector<Point3>, SurfaceGrid> GeneratorNet::forward(std::span<const double> z) const {
  if (z.size() != latent_dim) throw ArgumentError("generator: latent size mismatch");
  const Tensor off = mlp.evaluate(Tensor(1, z.size(), std::vector<double>(z.begin(), z.end())));
  const std::size_t lp = ffd.lattice_points();
  std::vector<Point3> delta(lp);
  for (std::size_t q = 0; q < lp; ++q) delta[q] = {off.data[q], 0.0, off.data[lp + q]};
  ad::NoGradGuard guard;
  const Var flat = surface(ad::constant(off));
  SurfaceGrid grid(ffd.base.sections(), ffd.base.points_per_section());
  auto pts = grid.points();
  for (std::size_t p = 0; p < pts.size(); ++p) {
    pts[p] = {flat.value().data[3 * p], flat.value().data[3 * p + 1], flat.value().data[3 * p + 2]};
    if (!std::isfinite(pts[p].x) || !std::isfinite(pts[p].z)) {
      throw NumericError("non-finite activation in FFD layer");
    }
  }
  return {std::move(delta), std::move(grid)};
}

SurfaceGrid GeneratorNet::decode(std::span<const double> z) const { return forward(z).second; }

// --------------------------------------------------------------- losses ----

CriticLoss critic_loss(const DiscriminatorNet& d, const Var& real, const Var& fake,
                       const Tensor& eps, double gamma1) {
  const std::size_t b = real.rows();
  if (fake.rows() != b || eps.rows != b || eps.cols != 1 || !real.value().same_shape(fake.value())) {
    throw ArgumentError("critic_loss: batch shapes differ");
  }
  Tensor mixed(b, real.cols());
  for (std::size_t i = 0; i < b; ++i) {
    const double e = eps.data[i];
    for (std::size_t j = 0; j < real.cols(); ++j) {
      mixed(i, j) = e * real.value()(i, j) + (1.0 - e) * fake.value()(i, j);
    }
  }
  const Var x_hat = ad::parameter(std::move(mixed));
  const Var inner = ad::sum(d.score(x_hat));
  const Var g = ad::grad(inner, std::span<const Var>(&x_hat, 1), true)[0];
  const Var norms = ad::sqrt(ad::add_scalar(ad::sum_cols(ad::square(g)), 1e-12));
  const Var r1 = ad::mean(ad::square(ad::add_scalar(norms, -1.0)));
  const Var d_real = ad::mean(d.score(real));
  const Var d_fake = ad::mean(d.score(fake));

  CriticLoss out;
  out.loss = ad::add(ad::sub(d_fake, d_real), ad::scale(r1, gamma1));
  out.wasserstein = d_real.item() - d_fake.item();
  out.r1 = r1.item();
  double total = 0.0;
  for (double v : norms.value().data) total += v;
  out.mean_grad_norm = total / static_cast<double>(b);
  if (!std::isfinite(out.loss.item())) throw NumericError("critic loss is not finite");
  return out;
}

GeneratorLoss generator_loss(const DiscriminatorNet& d, const Var& offsets, const Var& fake,
                             double gamma2, std::size_t lattice_points) {
  if (offsets.rows() != fake.rows()) throw ArgumentError("generator_loss: batch sizes differ");
  const double denom = static_cast<double>(offsets.rows() * lattice_points);
  const Var r2 = ad::scale(ad::sum(ad::square(offsets)), 1.0 / denom);
  GeneratorLoss out;
  out.loss = ad::add(ad::scale(ad::mean(d.score(fake)), -1.0), ad::scale(r2, gamma2));
  out.r2 = r2.item();
  if (!std::isfinite(out.loss.item())) throw NumericError("generator loss is not finite");
  return out;
}

double offset_penalty(const Tensor& offsets, std::size_t lattice_points) {
  double s = 0.0;
  for (double v : offsets.data) s += v * v;
  return s / static_cast<double>(offsets.rows * lattice_points);
}

GanLosses wgan_gp_losses(const GeneratorNet& g, const DiscriminatorNet& d, const Tensor& real,
                         const Tensor& z, const Tensor& eps, const TrainConfig& config) {
  if (real.rows != z.rows) throw ArgumentError("wgan_gp_losses: batch sizes differ");
  const Var off = g.offsets(ad::constant(z));
  const Var fake = g.surface_sub(off);
  const auto c = critic_loss(d, ad::constant(real), fake, eps, config.gamma1);
  const auto gl = generator_loss(d, off, fake, config.gamma2, g.ffd.lattice_points());
  return {c.loss.item(), gl.loss.item(), c.r1, gl.r2};
}

// ----------------------------------------------------------------- Adam ----

void adam_step(std::span<Var> params, std::span<const Var> grads, AdamState& state, double lr,
               double beta1, double beta2, double epsilon) {
  if (params.size() != grads.size()) throw ArgumentError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.rows(), p.cols());
      state.v.emplace_back(p.rows(), p.cols());
    }
  }
  if (state.m.size() != params.size()) throw ArgumentError("adam_step: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k].mutable_value();
    const Tensor& g = grads[k].value();
    if (!p.same_shape(g) || !p.same_shape(state.m[k])) throw ArgumentError("adam_step: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      double& m = state.m[k].data[i];
      double& v = state.v[k].data[i];
      m = beta1 * m + (1.0 - beta1) * g.data[i];
      v = beta2 * v + (1.0 - beta2) * g.data[i] * g.data[i];
      p.data[i] -= lr * (m / c1) / (std::sqrt(v / c2) + epsilon);
    }
  }
}

// ------------------------------------------------------------- training ----

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(adam_epsilon > 0.0)) {
    throw ArgumentError("train config: invalid optimizer settings");
  }
  if (critic_iterations < 1 || batch_size < 1 || iterations < 0 || latent_dim < 1) {
    throw ArgumentError("train config: counts must be positive");
  }
  if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0)) throw ArgumentError("train config: negative penalty weight");
  if (lattice.l < 1 || lattice.m < 1 || lattice.n < 1) throw ArgumentError("train config: bad lattice");
  if (critic_stride < 1) throw ArgumentError("train config: critic stride must be positive");
  if (checkpoint_every < 0) throw ArgumentError("train config: negative checkpoint interval");
}

namespace {

GeneratorNet make_generator(const SurfaceGrid& mean, const TrainConfig& config, Rng& rng) {
  GeneratorNet g;
  g.latent_dim = config.latent_dim;
  g.ffd = FfdLayer::build(mean, config.lattice, config.inflation, config.critic_stride);
  std::vector<std::size_t> widths{config.latent_dim};
  widths.insert(widths.end(), config.generator_hidden.begin(), config.generator_hidden.end());
  widths.push_back(2 * g.ffd.lattice_points());
  g.mlp = Mlp::init(widths, config.slope, rng);
  return g;
}

DiscriminatorNet make_critic(std::size_t inputs, const TrainConfig& config, Rng& rng) {
  std::vector<std::size_t> widths{inputs};
  widths.insert(widths.end(), config.critic_hidden.begin(), config.critic_hidden.end());
  widths.push_back(1);
  return {Mlp::init(widths, config.slope, rng)};
}

void round_weights(Mlp& mlp) {
  for (auto& layer : mlp.layers) {
    round_tensor(layer.weight.mutable_value());
    round_tensor(layer.bias.mutable_value());
  }
}

Tensor latent_batch(std::size_t b, std::size_t dim, Rng& rng) {
  return uniform_tensor(b, dim, -1.0, 1.0, rng);
}

}  // namespace

TrainResult train(std::span<const SurfaceGrid> train_set, const TrainConfig& config,
                  const ProgressFn& progress) {
  config.validate();
  if (train_set.empty()) throw ArgumentError("train: empty training set");
  SurfaceGrid mean = geom::mean_shape(train_set);
  // One pass per axis: GCC 11 at -O3 mis-vectorizes the fused three-field
  // loop and leaves the last point unrounded.
  for (auto& p : mean.points()) p.x = round_f32(p.x);
  for (auto& p : mean.points()) p.y = round_f32(p.y);
  for (auto& p : mean.points()) p.z = round_f32(p.z);

  Rng init_rng = Rng::derive(config.seed, 0, 0x67656e);
  TrainResult result;
  result.generator = make_generator(mean, config, init_rng);
  GeneratorNet& g = result.generator;
  result.critic = make_critic(3 * g.ffd.sub_points.size(), config, init_rng);
  DiscriminatorNet& d = result.critic;

  const Tensor data = flatten_grids(train_set, g.ffd.sub_points);
  const std::size_t n = train_set.size(), b = config.batch_size, width = data.cols;
  Rng rng = Rng::derive(config.seed, 1, 0x747261);
  auto g_params = g.mlp.parameters();
  auto d_params = d.mlp.parameters();
  AdamState g_state, d_state;

  for (int it = 1; it <= config.iterations; ++it) {
    HistoryRow row;
    row.iteration = it;
    try {
      for (int c = 0; c < config.critic_iterations; ++c) {
        Tensor real(b, width);
        for (std::size_t i = 0; i < b; ++i) {
          const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
          std::copy_n(data.data.begin() + static_cast<std::ptrdiff_t>(k * width), width,
                      real.data.begin() + static_cast<std::ptrdiff_t>(i * width));
        }
        const Tensor z = latent_batch(b, config.latent_dim, rng);
        Tensor eps(b, 1);
        for (double& e : eps.data) e = rng.uniform();
        Var fake;
        {
          ad::NoGradGuard guard;
          fake = ad::constant(g.surface_sub(g.offsets(ad::constant(z))).value());
        }
        const auto cl = critic_loss(d, ad::constant(std::move(real)), fake, eps, config.gamma1);
        const auto grads = ad::grad(cl.loss, d_params);
        adam_step(d_params, grads, d_state, config.learning_rate, config.beta1, config.beta2,
                  config.adam_epsilon);
        row.loss_d = cl.loss.item();
        row.wasserstein = cl.wasserstein;
        row.r1 = cl.r1;
        row.grad_norm = cl.mean_grad_norm;
      }
      const Tensor z = latent_batch(b, config.latent_dim, rng);
      const Var off = g.offsets(ad::constant(z));
      const auto gl = generator_loss(d, off, g.surface_sub(off), config.gamma2, g.ffd.lattice_points());
      const auto grads = ad::grad(gl.loss, g_params);
      adam_step(g_params, grads, g_state, config.learning_rate, config.beta1, config.beta2,
                config.adam_epsilon);
      row.loss_g = gl.loss.item();
      row.r2 = gl.r2;
    } catch (const NumericError&) {
      if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, g, &d, config, it - 1);
      throw;
    }
    result.history.push_back(row);
    if (progress) progress(row);
    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0 && !config.checkpoint_path.empty()) {
      save_checkpoint(config.checkpoint_path, g, &d, config, it);
    }
  }
  round_weights(g.mlp);
  round_weights(d.mlp);
  g.trained = true;
  return result;
}

double critic_gradient_norm(const GeneratorNet& g, const DiscriminatorNet& d,
                            std::span<const SurfaceGrid> real, std::size_t batch, Rng& rng) {
  if (real.empty() || batch == 0) throw ArgumentError("critic_gradient_norm: empty batch");
  std::vector<SurfaceGrid> picked;
  for (std::size_t i = 0; i < batch; ++i) {
    const auto k = rng.uniform_int(0, static_cast<std::int64_t>(real.size()) - 1);
    picked.push_back(real[static_cast<std::size_t>(k)]);
  }
  const Tensor x_real = flatten_grids(picked, g.ffd.sub_points);
  const Tensor z = latent_batch(batch, g.latent_dim, rng);
  Tensor x_fake;
  {
    ad::NoGradGuard guard;
    x_fake = g.surface_sub(g.offsets(ad::constant(z))).value();
  }
  Tensor eps(batch, 1);
  for (double& e : eps.data) e = rng.uniform();
  return critic_loss(d, ad::constant(x_real), ad::constant(x_fake), eps, 0.0).mean_grad_norm;
}

}  // namespace ffdgan::nn
