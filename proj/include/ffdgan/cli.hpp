#pragma once

// Command-line front end: one run configuration document with a section per
// module, and the subcommands that drive the pipeline stages.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ffdgan/bayes_opt.hpp"
#include "ffdgan/grammar.hpp"
#include "ffdgan/harness.hpp"
#include "ffdgan/io.hpp"
#include "ffdgan/neural.hpp"

namespace ffdgan::cli {

struct FfdSection {
  geom::LatticeDims lattice{2, 3, 1};
  double inflation = 0.05;
  double bound = 0.1;
};

struct BsplineSection {
  int n_v = 4;
  int n_u = 14;
  double sweep_bound_deg = 5.0;
  double z_bound = 0.1;
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  grammar::GrammarConfig grammar;
  std::size_t dataset_count = 2000;
  std::filesystem::path dataset_path;
  nn::TrainConfig train;
  FfdSection ffd;
  BsplineSection bspline;
  harness::FitOptions fit;
  std::size_t fit_targets = 100;
  std::size_t feasibility_samples = 1000;
  bo::OptBudget optimize;
  double eval_alpha_deg = 2.0;
};

io::Json to_json(const RunConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const io::Json& j);

// Runs one command. `args` excludes the program name. Returns the process
// exit status; diagnostics go to `err`. Files a failed command created in
// its output directory are removed.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ffdgan::cli
