#pragma once

// Persistence: float32 blocks, dataset files, meshes, CSV, JSON config
// sections, and run manifests.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffdgan/geometry.hpp"
#include "ffdgan/grammar.hpp"
#include "ffdgan/neural.hpp"
#include "ffdgan/parameterization.hpp"

namespace ffdgan::io {

using Json = nlohmann::ordered_json;

void write_f32le(std::ostream& out, std::span<const double> values);
std::vector<double> read_f32le(std::istream& in, std::size_t count);

// Locale-independent shortest round-trip text for a double.
std::string format_double(double value);

// ---- config sections (flags override file values in the CLI) ----
Json to_json(const grammar::GrammarConfig& c);
grammar::GrammarConfig grammar_config_from_json(const Json& j);
Json to_json(const nn::TrainConfig& c);
nn::TrainConfig train_config_from_json(const Json& j);
std::uint64_t config_hash(const Json& j);

// Throws ArgumentError naming the first key of `j` not present in `known`.
void reject_unknown_keys(const Json& j, const Json& known, const std::string& section);

// ---- parameterization definitions (type tag, dims, bounds, control data) ----
Json to_json(const geom::SurfaceGrid& grid);
geom::SurfaceGrid grid_from_json(const Json& j);
Json to_json(const param::FfdParamDef& def);
param::FfdParamDef ffd_param_def_from_json(const Json& j);
Json to_json(const param::BsplineParamDef& def);
param::BsplineParamDef bspline_param_def_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

// ---- dataset: <stem>.json header + <stem>.bin float32 M x N x 3 per wing ----
void save_dataset(const std::filesystem::path& header_path, const grammar::Dataset& data,
                  const grammar::GrammarConfig& config);
grammar::Dataset load_dataset(const std::filesystem::path& header_path);

// ---- meshes ----
// Vertices row-major over the grid, quads between adjacent sections. Open at
// the root and tip sections.
void export_obj(const geom::SurfaceGrid& grid, const std::filesystem::path& path);
// Several wings as separate objects in one file.
void export_obj(std::span<const geom::SurfaceGrid> grids, const std::filesystem::path& path);
geom::SurfaceGrid import_obj(const std::filesystem::path& path);

// ---- CSV ----
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::span<const std::string> header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  CsvWriter& cell(double value);
  CsvWriter& cell(std::int64_t value);
  CsvWriter& cell(const std::string& value);
  void end_row();
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

// ---- manifests ----
std::string code_version();
void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& argv,
                    const Json& config, std::uint64_t seed);

}  // namespace ffdgan::io
