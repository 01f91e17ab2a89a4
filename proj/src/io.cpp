#include "ffdgan/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ffdgan/errors.hpp"
#include "ffdgan/rng.hpp"

#ifndef FFDGAN_VERSION
#define FFDGAN_VERSION "unknown"
#endif

namespace ffdgan::io {

using geom::SurfaceGrid;

void write_f32le(std::ostream& out, std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) {
      bytes[4 * i + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<double> read_f32le(std::istream& in, std::size_t count) {
  std::vector<unsigned char> bytes(count * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw IoError("float32 block is truncated");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(bytes[4 * i + static_cast<std::size_t>(b)]) << (8 * b);
    }
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

// ------------------------------------------------------------- configs ----

namespace {

Json range(const grammar::Range& r) { return Json::array({r.lo, r.hi}); }

grammar::Range get_range(const Json& j, const char* key, grammar::Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw ArgumentError(std::string("config: ") + key + " must be [lo, hi]");
  return {v[0], v[1]};
}

template <class T>
void get_if(const Json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

}  // namespace

Json to_json(const grammar::GrammarConfig& c) {
  return Json{{"min_sections", c.min_sections},
              {"max_sections", c.max_sections},
              {"root_chord", range(c.root_chord)},
              {"min_tip_ratio", c.min_tip_ratio},
              {"max_chord_step", c.max_chord_step},
              {"twist_step_deg", c.twist_step_deg},
              {"total_twist_deg", range(c.total_twist_deg)},
              {"sweep_slope", range(c.sweep_slope)},
              {"dihedral_step", range(c.dihedral_step)},
              {"min_span_gap", c.min_span_gap},
              {"uniform_span_stations", c.uniform_span_stations},
              {"camber", range(c.camber)},
              {"camber_pos", range(c.camber_pos)},
              {"thickness", range(c.thickness)},
              {"sections_out", c.sections_out},
              {"points_out", c.points_out}};
}

grammar::GrammarConfig grammar_config_from_json(const Json& j) {
  grammar::GrammarConfig c;
  reject_unknown_keys(j, to_json(c), "grammar");
  try {
    get_if(j, "min_sections", c.min_sections);
    get_if(j, "max_sections", c.max_sections);
    c.root_chord = get_range(j, "root_chord", c.root_chord);
    get_if(j, "min_tip_ratio", c.min_tip_ratio);
    get_if(j, "max_chord_step", c.max_chord_step);
    get_if(j, "twist_step_deg", c.twist_step_deg);
    c.total_twist_deg = get_range(j, "total_twist_deg", c.total_twist_deg);
    c.sweep_slope = get_range(j, "sweep_slope", c.sweep_slope);
    c.dihedral_step = get_range(j, "dihedral_step", c.dihedral_step);
    get_if(j, "min_span_gap", c.min_span_gap);
    get_if(j, "uniform_span_stations", c.uniform_span_stations);
    c.camber = get_range(j, "camber", c.camber);
    c.camber_pos = get_range(j, "camber_pos", c.camber_pos);
    c.thickness = get_range(j, "thickness", c.thickness);
    get_if(j, "sections_out", c.sections_out);
    get_if(j, "points_out", c.points_out);
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("grammar config: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const nn::TrainConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"critic_iterations", c.critic_iterations},
              {"batch_size", c.batch_size},
              {"iterations", c.iterations},
              {"gamma1", c.gamma1},
              {"gamma2", c.gamma2},
              {"latent_dim", c.latent_dim},
              {"seed", c.seed},
              {"lattice", {c.lattice.l, c.lattice.m, c.lattice.n}},
              {"inflation", c.inflation},
              {"generator_hidden", c.generator_hidden},
              {"critic_hidden", c.critic_hidden},
              {"slope", c.slope},
              {"critic_stride", c.critic_stride},
              {"checkpoint_every", c.checkpoint_every}};
}

nn::TrainConfig train_config_from_json(const Json& j) {
  nn::TrainConfig c;
  reject_unknown_keys(j, to_json(c), "train");
  try {
    get_if(j, "learning_rate", c.learning_rate);
    get_if(j, "beta1", c.beta1);
    get_if(j, "beta2", c.beta2);
    get_if(j, "adam_epsilon", c.adam_epsilon);
    get_if(j, "critic_iterations", c.critic_iterations);
    get_if(j, "batch_size", c.batch_size);
    get_if(j, "iterations", c.iterations);
    get_if(j, "gamma1", c.gamma1);
    get_if(j, "gamma2", c.gamma2);
    get_if(j, "latent_dim", c.latent_dim);
    get_if(j, "seed", c.seed);
    if (j.contains("lattice")) {
      const auto v = j.at("lattice").get<std::vector<int>>();
      if (v.size() != 3) throw ArgumentError("train config: lattice must be [l, m, n]");
      c.lattice = {v[0], v[1], v[2]};
    }
    get_if(j, "inflation", c.inflation);
    get_if(j, "generator_hidden", c.generator_hidden);
    get_if(j, "critic_hidden", c.critic_hidden);
    get_if(j, "slope", c.slope);
    get_if(j, "critic_stride", c.critic_stride);
    get_if(j, "checkpoint_every", c.checkpoint_every);
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t config_hash(const Json& j) { return fnv1a64(j.dump()); }

void reject_unknown_keys(const Json& j, const Json& known, const std::string& section) {
  if (!j.is_object()) throw ArgumentError(section + " config must be an object");
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) {
      throw ArgumentError(section + " config: unknown key '" + item.key() + "'");
    }
  }
}

// -------------------------------------------------- parameterizations ----

Json to_json(const SurfaceGrid& grid) {
  std::vector<double> flat;
  flat.reserve(grid.size() * 3);
  for (const auto& p : grid.points()) {
    flat.push_back(p.x);
    flat.push_back(p.y);
    flat.push_back(p.z);
  }
  return Json{{"sections", grid.sections()},
              {"points_per_section", grid.points_per_section()},
              {"points", flat}};
}

SurfaceGrid grid_from_json(const Json& j) {
  try {
    const auto m = j.at("sections").get<std::size_t>();
    const auto n = j.at("points_per_section").get<std::size_t>();
    const auto flat = j.at("points").get<std::vector<double>>();
    if (flat.size() != m * n * 3) throw ArgumentError("grid: point count does not match its size");
    std::vector<geom::Point3> pts(m * n);
    for (std::size_t p = 0; p < pts.size(); ++p) pts[p] = {flat[3 * p], flat[3 * p + 1], flat[3 * p + 2]};
    return SurfaceGrid(m, n, std::move(pts));
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("grid: ") + e.what());
  }
}

namespace {

Json points_json(std::span<const geom::Point3> pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back(Json::array({p.x, p.y, p.z}));
  return a;
}

std::vector<geom::Point3> points_from_json(const Json& j) {
  std::vector<geom::Point3> out;
  for (const auto& p : j) {
    const auto v = p.get<std::vector<double>>();
    if (v.size() != 3) throw ArgumentError("control point must have three coordinates");
    out.push_back({v[0], v[1], v[2]});
  }
  return out;
}

}  // namespace

Json to_json(const param::FfdParamDef& def) {
  return Json{{"type", "ffd"},
              {"dims", 2 * def.dims.count()},
              {"lattice", {def.dims.l, def.dims.m, def.dims.n}},
              {"inflation", def.inflation},
              {"bound", def.bound},
              {"base", to_json(def.base)}};
}

param::FfdParamDef ffd_param_def_from_json(const Json& j) {
  try {
    if (j.at("type") != "ffd") throw ArgumentError("parameterization document is not of type ffd");
    param::FfdParamDef d;
    const auto l = j.at("lattice").get<std::vector<int>>();
    if (l.size() != 3) throw ArgumentError("ffd: lattice must be [l, m, n]");
    d.dims = {l[0], l[1], l[2]};
    d.inflation = j.at("inflation").get<double>();
    d.bound = j.at("bound").get<double>();
    d.base = grid_from_json(j.at("base"));
    return d;
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("ffd parameterization: ") + e.what());
  }
}

Json to_json(const param::BsplineParamDef& def) {
  const auto& s = def.surface;
  return Json{{"type", "bspline"},
              {"dims", 2 + static_cast<std::size_t>(s.n_v) * static_cast<std::size_t>(s.n_u - 1)},
              {"sweep_bound_deg", def.sweep_bound_deg},
              {"z_bound", def.z_bound},
              {"degree", {s.degree_u, s.degree_v}},
              {"n_u", s.n_u},
              {"n_v", s.n_v},
              {"net", points_json(s.net)},
              {"knots_u", s.knots_u},
              {"knots_v", s.knots_v},
              {"params_u", s.params_u},
              {"params_v", s.params_v},
              {"sweep_le_deg", s.sweep_le_deg},
              {"sweep_te_deg", s.sweep_te_deg}};
}

param::BsplineParamDef bspline_param_def_from_json(const Json& j) {
  try {
    if (j.at("type") != "bspline") throw ArgumentError("parameterization document is not of type bspline");
    param::BsplineParamDef d;
    d.sweep_bound_deg = j.at("sweep_bound_deg").get<double>();
    d.z_bound = j.at("z_bound").get<double>();
    auto& s = d.surface;
    const auto deg = j.at("degree").get<std::vector<int>>();
    if (deg.size() != 2) throw ArgumentError("bspline: degree must be [u, v]");
    s.degree_u = deg[0];
    s.degree_v = deg[1];
    s.n_u = j.at("n_u").get<int>();
    s.n_v = j.at("n_v").get<int>();
    s.net = points_from_json(j.at("net"));
    s.knots_u = j.at("knots_u").get<std::vector<double>>();
    s.knots_v = j.at("knots_v").get<std::vector<double>>();
    s.params_u = j.at("params_u").get<std::vector<double>>();
    s.params_v = j.at("params_v").get<std::vector<double>>();
    s.sweep_le_deg = j.at("sweep_le_deg").get<double>();
    s.sweep_te_deg = j.at("sweep_te_deg").get<double>();
    s.validate();
    return d;
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("bspline parameterization: ") + e.what());
  }
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ArgumentError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

// ------------------------------------------------------------- dataset ----

void save_dataset(const std::filesystem::path& header_path, const grammar::Dataset& data,
                  const grammar::GrammarConfig& config) {
  if (data.grids.empty()) throw ArgumentError("save_dataset: empty dataset");
  const std::size_t m = data.grids.front().sections(), n = data.grids.front().points_per_section();
  auto bin_path = header_path;
  bin_path.replace_extension(".bin");
  std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + bin_path.string());
  std::vector<double> flat(m * n * 3);
  for (const auto& g : data.grids) {
    if (g.sections() != m || g.points_per_section() != n) throw ArgumentError("save_dataset: mixed grid sizes");
    for (std::size_t p = 0; p < g.size(); ++p) {
      flat[3 * p] = g.points()[p].x;
      flat[3 * p + 1] = g.points()[p].y;
      flat[3 * p + 2] = g.points()[p].z;
    }
    write_f32le(out, flat);
  }
  if (!out) throw IoError("failed writing " + bin_path.string());
  const Json cfg = to_json(config);
  Json header{{"format", "ffdgan-dataset"},
              {"version", 1},
              {"count", data.grids.size()},
              {"sections", m},
              {"points_per_section", n},
              {"seed", data.seed},
              {"config_hash", config_hash(cfg)},
              {"config", cfg},
              {"data_file", bin_path.filename().string()},
              {"layout", "float32 little-endian, wing-major, row-major sections x points x (x,y,z)"},
              {"train", data.train},
              {"test", data.test}};
  write_json(header_path, header);
}

grammar::Dataset load_dataset(const std::filesystem::path& header_path) {
  const Json header = read_json(header_path);
  grammar::Dataset data;
  try {
    if (header.at("format").get<std::string>() != "ffdgan-dataset") throw IoError("not a dataset header");
    const auto count = header.at("count").get<std::size_t>();
    const auto m = header.at("sections").get<std::size_t>();
    const auto n = header.at("points_per_section").get<std::size_t>();
    data.seed = header.at("seed").get<std::uint64_t>();
    data.train = header.at("train").get<std::vector<std::size_t>>();
    data.test = header.at("test").get<std::vector<std::size_t>>();
    const auto bin_path = header_path.parent_path() / header.at("data_file").get<std::string>();
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + bin_path.string());
    for (std::size_t w = 0; w < count; ++w) {
      const auto flat = read_f32le(in, m * n * 3);
      SurfaceGrid g(m, n);
      for (std::size_t p = 0; p < g.size(); ++p) g.points()[p] = {flat[3 * p], flat[3 * p + 1], flat[3 * p + 2]};
      data.grids.push_back(std::move(g));
    }
    for (auto idx : data.train) {
      if (idx >= count) throw IoError("dataset split index out of range");
    }
    for (auto idx : data.test) {
      if (idx >= count) throw IoError("dataset split index out of range");
    }
  } catch (const Json::exception& e) {
    throw IoError(std::string("dataset header is malformed: ") + e.what());
  }
  return data;
}

// --------------------------------------------------------------- meshes ----

namespace {

void write_obj_object(std::ostream& out, const SurfaceGrid& g, std::size_t vertex_offset) {
  const std::size_t m = g.sections(), n = g.points_per_section();
  for (const auto& p : g.points()) {
    out << "v " << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << '\n';
  }
  for (std::size_t s = 0; s + 1 < m; ++s) {
    for (std::size_t t = 0; t + 1 < n; ++t) {
      const std::size_t a = vertex_offset + s * n + t + 1;  // OBJ indices are 1-based
      out << "f " << a << ' ' << a + 1 << ' ' << a + n + 1 << ' ' << a + n << '\n';
    }
  }
}

}  // namespace

void export_obj(const SurfaceGrid& grid, const std::filesystem::path& path) {
  export_obj(std::span<const SurfaceGrid>(&grid, 1), path);
}

void export_obj(std::span<const SurfaceGrid> grids, const std::filesystem::path& path) {
  for (const auto& g : grids) {
    if (g.sections() < 2 || g.points_per_section() < 2) {
      throw ArgumentError("export_obj: grid needs at least 2 x 2 points");
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < grids.size(); ++k) {
    out << "# grid " << grids[k].sections() << ' ' << grids[k].points_per_section() << '\n';
    out << "o wing_" << k << '\n';
    write_obj_object(out, grids[k], offset);
    offset += grids[k].size();
  }
  if (!out) throw IoError("failed writing " + path.string());
}

SurfaceGrid import_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::size_t m = 0, n = 0;
  std::vector<geom::Point3> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# grid ", 0) == 0) {
      if (m != 0) break;  // first object only
      std::istringstream ls(line.substr(7));
      ls.imbue(std::locale::classic());
      ls >> m >> n;
    } else if (line.rfind("v ", 0) == 0) {
      geom::Point3 p;
      const char* cur = line.c_str() + 2;
      const char* end = line.c_str() + line.size();
      for (double* dst : {&p.x, &p.y, &p.z}) {
        while (cur < end && *cur == ' ') ++cur;
        const auto res = std::from_chars(cur, end, *dst);
        if (res.ec != std::errc()) throw IoError("malformed vertex line in " + path.string());
        cur = res.ptr;
      }
      pts.push_back(p);
    }
  }
  if (m < 2 || n < 2 || pts.size() < m * n) throw IoError("OBJ file lacks a grid header or vertices: " + path.string());
  pts.resize(m * n);
  return SurfaceGrid(m, n, std::move(pts));
}

// ------------------------------------------------------------------ CSV ----

struct CsvWriter::Impl {
  std::ofstream out;
  std::size_t columns = 0;
  std::size_t filled = 0;
};

CsvWriter::CsvWriter(const std::filesystem::path& path, std::span<const std::string> header)
    : impl_(new Impl) {
  impl_->out.open(path, std::ios::trunc);
  if (!impl_->out) {
    delete impl_;
    throw IoError("cannot write " + path.string());
  }
  impl_->columns = header.size();
  for (const auto& h : header) cell(h);
  end_row();
}

CsvWriter::~CsvWriter() { delete impl_; }

CsvWriter& CsvWriter::cell(double value) { return cell(format_double(value)); }

CsvWriter& CsvWriter::cell(std::int64_t value) { return cell(std::to_string(value)); }

CsvWriter& CsvWriter::cell(const std::string& value) {
  if (impl_->filled++ > 0) impl_->out << ',';
  if (value.find_first_of(",\"\n") != std::string::npos) {
    impl_->out << '"';
    for (char c : value) {
      if (c == '"') impl_->out << '"';
      impl_->out << c;
    }
    impl_->out << '"';
  } else {
    impl_->out << value;
  }
  return *this;
}

void CsvWriter::end_row() {
  if (impl_->filled != impl_->columns) throw ArgumentError("CsvWriter: row has the wrong number of cells");
  impl_->out << '\n';
  impl_->filled = 0;
}

void CsvWriter::close() {
  impl_->out.close();
  if (impl_->out.fail()) throw IoError("failed writing CSV");
}

// ------------------------------------------------------------- manifest ----

std::string code_version() { return FFDGAN_VERSION; }

void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& argv,
                    const Json& config, std::uint64_t seed) {
  std::string command;
  for (const auto& a : argv) command += (command.empty() ? "" : " ") + a;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  write_json(dir / "manifest.json", Json{{"command", command},
                                         {"argv", argv},
                                         {"seed", seed},
                                         {"config_hash", hash},
                                         {"config", config},
                                         {"code_version", code_version()}});
}

}  // namespace ffdgan::io
