#include <cstring>
#include <fstream>

#include "ffdgan/errors.hpp"
#include "ffdgan/io.hpp"
#include "ffdgan/neural.hpp"

namespace ffdgan::nn {

namespace {

constexpr const char* kMagic = "FFDGAN-CHECKPOINT 1\n";

struct Block {
  std::string name;
  const ad::Tensor* tensor;
};

void add_mlp(std::vector<Block>& blocks, const Mlp& mlp, const std::string& prefix) {
  for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
    blocks.push_back({prefix + ".W" + std::to_string(k), &mlp.layers[k].weight.value()});
    blocks.push_back({prefix + ".b" + std::to_string(k), &mlp.layers[k].bias.value()});
  }
}

Mlp read_mlp(std::istream& in, const io::Json& widths_json, double slope,
             const io::Json& table, std::size_t& next) {
  const auto widths = widths_json.get<std::vector<std::size_t>>();
  Mlp mlp;
  mlp.slope = slope;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    ad::Tensor w(widths[k], widths[k + 1]), b(1, widths[k + 1]);
    for (ad::Tensor* t : {&w, &b}) {
      const auto& entry = table.at(next++);
      if (entry.at("rows").get<std::size_t>() != t->rows || entry.at("cols").get<std::size_t>() != t->cols) {
        throw IoError("checkpoint: block " + entry.at("name").get<std::string>() + " has an unexpected shape");
      }
      t->data = io::read_f32le(in, t->size());
    }
    mlp.layers.push_back({ad::parameter(std::move(w)), ad::parameter(std::move(b))});
  }
  return mlp;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GeneratorNet& g,
                     const DiscriminatorNet* d, const TrainConfig& config, int iteration) {
  ad::Tensor base(g.ffd.base.size(), 3);
  for (std::size_t p = 0; p < g.ffd.base.size(); ++p) {
    const auto& q = g.ffd.base.points()[p];
    base(p, 0) = q.x;
    base(p, 1) = q.y;
    base(p, 2) = q.z;
  }
  std::vector<Block> blocks{{"base_grid", &base}};
  add_mlp(blocks, g.mlp, "generator");
  if (d) add_mlp(blocks, d->mlp, "critic");

  io::Json header;
  header["format"] = "ffdgan-checkpoint";
  header["version"] = 1;
  header["iteration"] = iteration;
  header["trained"] = g.trained;
  header["config"] = io::to_json(config);
  header["generator"] = {{"latent_dim", g.latent_dim},
                         {"widths", g.mlp.widths()},
                         {"slope", g.mlp.slope},
                         {"lattice", {g.ffd.dims.l, g.ffd.dims.m, g.ffd.dims.n}},
                         {"inflation", g.ffd.inflation},
                         {"critic_stride", g.ffd.stride},
                         {"grid", {g.ffd.base.sections(), g.ffd.base.points_per_section()}}};
  header["critic"] = d ? io::Json{{"widths", d->mlp.widths()}, {"slope", d->mlp.slope}} : io::Json();
  io::Json table = io::Json::array();
  for (const auto& b : blocks) table.push_back({{"name", b.name}, {"rows", b.tensor->rows}, {"cols", b.tensor->cols}});
  header["blocks"] = table;

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, static_cast<std::streamsize>(std::strlen(kMagic)));
  std::uint64_t len = text.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>(len >> (8 * i));
  out.write(reinterpret_cast<const char*>(len_bytes), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : blocks) io::write_f32le(out, b.tensor->data);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string magic(std::strlen(kMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (magic != kMagic) throw IoError("not an FFD-GAN checkpoint: " + path.string());
  unsigned char len_bytes[8];
  in.read(reinterpret_cast<char*>(len_bytes), 8);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(len_bytes[i]) << (8 * i);
  if (!in || len > (1u << 26)) throw IoError("checkpoint header is corrupt");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("checkpoint header is truncated");

  Checkpoint ck;
  try {
    const auto header = io::Json::parse(text);
    ck.config = io::train_config_from_json(header.at("config"));
    ck.iteration = header.at("iteration").get<int>();
    const auto& gen = header.at("generator");
    const auto& table = header.at("blocks");
    const auto grid_dims = gen.at("grid").get<std::vector<std::size_t>>();
    const auto lat = gen.at("lattice").get<std::vector<int>>();
    if (grid_dims.size() != 2 || lat.size() != 3) throw IoError("checkpoint: malformed generator header");

    std::size_t next = 0;
    const auto& base_entry = table.at(next++);
    if (base_entry.at("rows").get<std::size_t>() != grid_dims[0] * grid_dims[1]) {
      throw IoError("checkpoint: base grid block has an unexpected shape");
    }
    const auto base_values = io::read_f32le(in, grid_dims[0] * grid_dims[1] * 3);
    geom::SurfaceGrid base(grid_dims[0], grid_dims[1]);
    for (std::size_t p = 0; p < base.size(); ++p) {
      base.points()[p] = {base_values[3 * p], base_values[3 * p + 1], base_values[3 * p + 2]};
    }
    ck.generator.latent_dim = gen.at("latent_dim").get<std::size_t>();
    ck.generator.ffd = FfdLayer::build(base, {lat[0], lat[1], lat[2]}, gen.at("inflation").get<double>(),
                                       gen.at("critic_stride").get<std::size_t>());
    ck.generator.mlp = read_mlp(in, gen.at("widths"), gen.at("slope").get<double>(), table, next);
    ck.generator.trained = header.at("trained").get<bool>();
    if (!header.at("critic").is_null()) {
      const auto& cr = header.at("critic");
      ck.critic.mlp = read_mlp(in, cr.at("widths"), cr.at("slope").get<double>(), table, next);
      ck.has_critic = true;
    }
  } catch (const io::Json::exception& e) {
    throw IoError(std::string("checkpoint header is malformed: ") + e.what());
  }
  return ck;
}

}  // namespace ffdgan::nn
