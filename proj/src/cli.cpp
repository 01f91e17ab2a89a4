#include "ffdgan/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <memory>
#include <ostream>
#include <set>

#include "ffdgan/aero.hpp"
#include "ffdgan/errors.hpp"
#include "ffdgan/gan_param.hpp"

namespace ffdgan::cli {

namespace fs = std::filesystem;
using io::Json;

// ------------------------------------------------------------- config ----

Json to_json(const RunConfig& c) {
  const auto& f = c.fit;
  const auto& o = c.optimize;
  return Json{
      {"seed", c.seed},
      {"threads", c.threads},
      {"grammar", io::to_json(c.grammar)},
      {"dataset", {{"count", c.dataset_count}, {"path", c.dataset_path.generic_string()}}},
      {"train", io::to_json(c.train)},
      {"ffd",
       {{"lattice", {c.ffd.lattice.l, c.ffd.lattice.m, c.ffd.lattice.n}},
        {"inflation", c.ffd.inflation},
        {"bound", c.ffd.bound}}},
      {"bspline",
       {{"n_v", c.bspline.n_v},
        {"n_u", c.bspline.n_u},
        {"sweep_bound_deg", c.bspline.sweep_bound_deg},
        {"z_bound", c.bspline.z_bound}}},
      {"fit",
       {{"targets", c.fit_targets},
        {"bspline_rounds", f.bspline_rounds},
        {"golden_tolerance_deg", f.golden_tolerance_deg},
        {"gan_steps", f.gan_steps},
        {"gan_restarts", f.gan_restarts},
        {"gan_learning_rate", f.gan_learning_rate}}},
      {"feasibility", {{"samples", c.feasibility_samples}}},
      {"optimize",
       {{"n_init", o.n_init},
        {"n_seq", o.n_seq},
        {"kappa", o.kappa},
        {"alpha_min_deg", o.alpha_min_deg},
        {"alpha_max_deg", o.alpha_max_deg},
        {"mach", o.mach}}},
      {"eval", {{"alpha_deg", c.eval_alpha_deg}}}};
}

namespace {

template <class T>
void get_if(const Json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

// The section of `j` named `key`, checked against the same section of the
// defaults; an empty object when absent.
Json section(const Json& j, const Json& defaults, const char* key) {
  if (!j.contains(key)) return Json::object();
  const Json& s = j.at(key);
  if (defaults.at(key).is_object()) io::reject_unknown_keys(s, defaults.at(key), key);
  return s;
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  const Json defaults = to_json(c);
  io::reject_unknown_keys(j, defaults, "run");
  try {
    get_if(j, "seed", c.seed);
    get_if(j, "threads", c.threads);
    if (j.contains("grammar")) c.grammar = io::grammar_config_from_json(j.at("grammar"));
    if (j.contains("train")) c.train = io::train_config_from_json(j.at("train"));

    const Json ds = section(j, defaults, "dataset");
    get_if(ds, "count", c.dataset_count);
    if (ds.contains("path")) c.dataset_path = ds.at("path").get<std::string>();

    const Json ffd = section(j, defaults, "ffd");
    if (ffd.contains("lattice")) {
      const auto v = ffd.at("lattice").get<std::vector<int>>();
      if (v.size() != 3) throw ArgumentError("ffd config: lattice must be [l, m, n]");
      c.ffd.lattice = {v[0], v[1], v[2]};
    }
    get_if(ffd, "inflation", c.ffd.inflation);
    get_if(ffd, "bound", c.ffd.bound);

    const Json bs = section(j, defaults, "bspline");
    get_if(bs, "n_v", c.bspline.n_v);
    get_if(bs, "n_u", c.bspline.n_u);
    get_if(bs, "sweep_bound_deg", c.bspline.sweep_bound_deg);
    get_if(bs, "z_bound", c.bspline.z_bound);

    const Json fit = section(j, defaults, "fit");
    get_if(fit, "targets", c.fit_targets);
    get_if(fit, "bspline_rounds", c.fit.bspline_rounds);
    get_if(fit, "golden_tolerance_deg", c.fit.golden_tolerance_deg);
    get_if(fit, "gan_steps", c.fit.gan_steps);
    get_if(fit, "gan_restarts", c.fit.gan_restarts);
    get_if(fit, "gan_learning_rate", c.fit.gan_learning_rate);

    get_if(section(j, defaults, "feasibility"), "samples", c.feasibility_samples);

    const Json opt = section(j, defaults, "optimize");
    get_if(opt, "n_init", c.optimize.n_init);
    get_if(opt, "n_seq", c.optimize.n_seq);
    get_if(opt, "kappa", c.optimize.kappa);
    get_if(opt, "alpha_min_deg", c.optimize.alpha_min_deg);
    get_if(opt, "alpha_max_deg", c.optimize.alpha_max_deg);
    get_if(opt, "mach", c.optimize.mach);

    get_if(section(j, defaults, "eval"), "alpha_deg", c.eval_alpha_deg);
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("run config: ") + e.what());
  }
  c.optimize.validate();
  return c;
}

namespace {

// ---------------------------------------------------------- plumbing ----

// Removes whatever a failed command added to its output directory.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
    existed_ = fs::exists(dir_);
    if (existed_) {
      if (!fs::is_directory(dir_)) throw IoError("output path is not a directory: " + dir_.string());
      for (const auto& e : fs::directory_iterator(dir_)) before_.insert(e.path().filename().string());
    }
    fs::create_directories(dir_);
  }
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    std::vector<fs::path> added;
    for (const auto& e : fs::directory_iterator(dir_, ec)) {
      if (!before_.count(e.path().filename().string())) added.push_back(e.path());
    }
    for (const auto& p : added) fs::remove_all(p, ec);
    if (!existed_) fs::remove(dir_, ec);
  }

  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  bool existed_ = false;
  bool committed_ = false;
  std::set<std::string> before_;
};

// Flag values copied over the config after it has been read.
class Overrides {
 public:
  template <class T>
  void add(CLI::App* app, const std::string& name, const std::string& help,
           std::function<void(RunConfig&, const T&)> set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    apply_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
  }

  void apply(RunConfig& c) const {
    for (const auto& f : apply_) f(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> apply_;
};

struct Args {
  std::string config_path;
  std::string out_dir = "out";
  std::string dataset;
  std::string checkpoint;
  std::string param;
  std::string param_def;
  std::string resume;
  std::string obj;
  std::size_t n = 16;
  std::size_t dim = 0;
  std::size_t steps = 9;
  std::size_t index = 0;
};

grammar::Dataset require_dataset(const RunConfig& c, const Args& a) {
  const fs::path path = a.dataset.empty() ? c.dataset_path : fs::path(a.dataset);
  if (path.empty()) throw ArgumentError("a dataset is required (--dataset or dataset.path)");
  return io::load_dataset(path);
}

std::string numbered(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04zu%s", prefix, i, ext);
  return buf;
}

struct BuiltParam {
  std::unique_ptr<param::Parameterization> param;
  Json def;
};

BuiltParam gan_param(const fs::path& checkpoint) {
  auto ck = nn::load_checkpoint(checkpoint);
  BuiltParam b;
  b.param = std::make_unique<param::GanParameterization>(std::move(ck.generator));
  b.def = Json{{"type", "gan"},
               {"dims", b.param->space().dim()},
               {"bound", 1.0},
               {"checkpoint", checkpoint.generic_string()}};
  return b;
}

BuiltParam build_param(const RunConfig& c, const Args& a) {
  if (!a.param_def.empty()) {
    const Json j = io::read_json(a.param_def);
    const std::string type = j.value("type", "");
    if (!a.param.empty() && a.param != type) {
      throw ArgumentError("--param " + a.param + " does not match the definition type " + type);
    }
    if (type == "ffd") {
      return {std::make_unique<param::FfdParameterization>(io::ffd_param_def_from_json(j)), j};
    }
    if (type == "bspline") {
      return {std::make_unique<param::BsplineParameterization>(io::bspline_param_def_from_json(j)), j};
    }
    if (type == "gan") {
      if (!j.contains("checkpoint")) throw ArgumentError("gan definition has no checkpoint");
      return gan_param(j.at("checkpoint").get<std::string>());
    }
    throw ArgumentError("unknown parameterization type '" + type + "'");
  }
  if (a.param == "gan") {
    if (a.checkpoint.empty()) throw ArgumentError("--param gan needs --checkpoint");
    return gan_param(a.checkpoint);
  }
  if (a.param != "ffd" && a.param != "bspline") {
    throw ArgumentError("--param must be ffd, bspline or gan");
  }
  const auto data = require_dataset(c, a);
  const auto mean = geom::mean_shape(data.subset(data.train));
  if (a.param == "ffd") {
    param::FfdParamDef def{mean, c.ffd.lattice, c.ffd.inflation, c.ffd.bound};
    Json j = io::to_json(def);
    return {std::make_unique<param::FfdParameterization>(std::move(def)), std::move(j)};
  }
  param::BsplineParamDef def{param::bspline_fit_base(mean, c.bspline.n_v, c.bspline.n_u),
                             c.bspline.sweep_bound_deg, c.bspline.z_bound};
  Json j = io::to_json(def);
  return {std::make_unique<param::BsplineParameterization>(std::move(def)), std::move(j)};
}

// ---------------------------------------------------------- commands ----

void cmd_gen_dataset(const RunConfig& c, const Args&, const fs::path& out, std::ostream& log) {
  const auto data = grammar::generate_dataset(c.grammar, c.dataset_count, c.seed);
  io::save_dataset(out / "dataset.json", data, c.grammar);
  log << "dataset: " << data.grids.size() << " wings, " << data.train.size() << " train / "
      << data.test.size() << " test\n";
}

void cmd_train(const RunConfig& c, const Args& a, const fs::path& out, std::ostream& log) {
  const auto data = require_dataset(c, a);
  nn::TrainConfig cfg = c.train;
  cfg.seed = c.seed;
  if (cfg.checkpoint_every > 0) cfg.checkpoint_path = out / "generator.ckpt";
  const int every = std::max(1, cfg.iterations / 20);
  const auto result = nn::train(data.subset(data.train), cfg, [&](const nn::HistoryRow& r) {
    if (r.iteration % every == 0) {
      log << "iteration " << r.iteration << " loss_d " << io::format_double(r.loss_d) << " loss_g "
          << io::format_double(r.loss_g) << '\n';
    }
  });
  nn::save_checkpoint(out / "generator.ckpt", result.generator, &result.critic, cfg, cfg.iterations);

  const std::vector<std::string> header{"iteration", "loss_d", "loss_g", "wasserstein",
                                        "r1",        "r2",     "grad_norm"};
  io::CsvWriter csv(out / "loss.csv", header);
  for (const auto& r : result.history) {
    csv.cell(static_cast<std::int64_t>(r.iteration)).cell(r.loss_d).cell(r.loss_g);
    csv.cell(r.wasserstein).cell(r.r1).cell(r.r2).cell(r.grad_norm);
    csv.end_row();
  }
  csv.close();
}

const nn::GeneratorNet& trained(const nn::Checkpoint& ck) {
  if (!ck.generator.trained) throw StateError("checkpoint holds an untrained generator");
  return ck.generator;
}

void cmd_sample(const RunConfig& c, const Args& a, const fs::path& out, std::ostream& log) {
  if (a.checkpoint.empty()) throw ArgumentError("sample needs --checkpoint");
  const auto ck = nn::load_checkpoint(a.checkpoint);
  const auto& g = trained(ck);
  Rng rng(c.seed);
  std::vector<std::string> header{"sample_id"};
  for (std::size_t k = 0; k < g.latent_dim; ++k) header.push_back("z" + std::to_string(k));
  header.push_back("geometric_ok");
  io::CsvWriter csv(out / "samples.csv", header);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < a.n; ++i) {
    std::vector<double> z(g.latent_dim);
    for (auto& v : z) v = rng.uniform(-1.0, 1.0);
    const auto grid = g.decode(z);
    const bool good = !geom::self_intersection_check(grid);
    ok += good ? 1 : 0;
    io::export_obj(grid, out / numbered("sample_", i, ".obj"));
    csv.cell(static_cast<std::int64_t>(i));
    for (double v : z) csv.cell(v);
    csv.cell(static_cast<std::int64_t>(good)).end_row();
  }
  csv.close();
  log << "samples: " << a.n << ", geometrically valid " << ok << '\n';
}

void cmd_traverse(const RunConfig&, const Args& a, const fs::path& out, std::ostream& log) {
  if (a.checkpoint.empty()) throw ArgumentError("traverse needs --checkpoint");
  const auto ck = nn::load_checkpoint(a.checkpoint);
  const auto& g = trained(ck);
  const std::vector<double> others(g.latent_dim, 0.0);
  const auto grids = harness::latent_traverse(g, a.dim, a.steps, others);
  const auto name = "traverse_z" + std::to_string(a.dim) + ".obj";
  io::export_obj(grids, out / name);
  log << "traverse: " << grids.size() << " shapes along z" << a.dim << '\n';
}

void cmd_fit(const RunConfig& c, const Args& a, const fs::path& out, std::ostream& log) {
  const auto built = build_param(c, a);
  const auto data = require_dataset(c, a);
  if (c.fit_targets > data.test.size()) {
    throw ArgumentError("fit: " + std::to_string(c.fit_targets) + " targets requested, test split has " +
                        std::to_string(data.test.size()));
  }
  const std::vector<std::size_t> ids(data.test.begin(), data.test.begin() + static_cast<std::ptrdiff_t>(c.fit_targets));
  const auto targets = data.subset(ids);
  harness::FitOptions options = c.fit;
  options.seed = c.seed;
  const auto rows = harness::coverage(*built.param, built.param->kind(), targets, options, c.threads);
  io::write_json(out / "param.json", built.def);
  harness::write_fit_csv(out / "fit.csv", rows);

  double mse = 0.0, hd = 0.0;
  std::size_t warnings = 0;
  for (const auto& r : rows) {
    mse += r.mse;
    hd += r.hausdorff;
    warnings += r.warning ? 1 : 0;
  }
  const double n = static_cast<double>(rows.size());
  const Json summary{{"param", built.param->kind()},
                     {"dims", built.param->space().dim()},
                     {"targets", rows.size()},
                     {"mean_mse", rows.empty() ? 0.0 : mse / n},
                     {"mean_hausdorff", rows.empty() ? 0.0 : hd / n},
                     {"warnings", warnings}};
  io::write_json(out / "summary.json", summary);
  log << "fit " << built.param->kind() << ": mean hausdorff "
      << io::format_double(summary["mean_hausdorff"].get<double>()) << '\n';
}

void cmd_feasibility(const RunConfig& c, const Args& a, const fs::path& out, std::ostream& log) {
  const auto built = build_param(c, a);
  Rng rng(c.seed);
  const auto s = harness::feasibility_ratio(*built.param, c.feasibility_samples, rng, c.threads);
  io::write_json(out / "param.json", built.def);
  harness::write_feasibility_csv(out / "feasibility.csv", s);
  io::write_json(out / "summary.json", Json{{"param", built.param->kind()},
                                            {"dims", built.param->space().dim()},
                                            {"samples", s.samples},
                                            {"feasible", s.feasible},
                                            {"ratio", s.ratio},
                                            {"half_width", s.half_width}});
  log << "feasibility " << built.param->kind() << ": " << s.feasible << "/" << s.samples << '\n';
}

void cmd_optimize(const RunConfig& c, const Args& a, const fs::path& out, std::ostream& log) {
  const auto built = build_param(c, a);
  std::optional<bo::OptState> resume;
  if (!a.resume.empty()) resume = bo::load_opt_state(a.resume);
  const fs::path state_path = out / "state.json";
  io::write_json(out / "param.json", built.def);
  const auto state = bo::optimize_shape(*built.param, c.optimize, c.seed, std::move(resume),
                                        [&](const bo::OptState& s) { bo::save_opt_state(state_path, s); });
  bo::save_opt_state(state_path, state);
  bo::write_history_csv(out / "history.csv", state);
  log << "optimize " << built.param->kind() << ": best L/D "
      << io::format_double(state.history.empty() ? 0.0 : state.history.back().best_so_far) << '\n';
}

void cmd_eval(const RunConfig& c, const Args& a, const fs::path& out, std::ostream& log) {
  geom::SurfaceGrid grid;
  std::string source;
  if (!a.obj.empty()) {
    grid = io::import_obj(a.obj);
    source = a.obj;
  } else {
    const auto data = require_dataset(c, a);
    if (a.index >= data.grids.size()) throw ArgumentError("eval: --index out of range");
    grid = data.grids[a.index];
    source = "dataset#" + std::to_string(a.index);
  }
  const bool geometric_ok = !geom::self_intersection_check(grid);
  const aero::FlowCondition cond{c.optimize.mach, c.eval_alpha_deg, false};
  const auto r = aero::lifting_line_solve(grid, cond);
  io::write_json(out / "eval.json", Json{{"source", source},
                                         {"alpha_deg", cond.alpha_deg},
                                         {"mach", cond.mach},
                                         {"geometric_ok", geometric_ok},
                                         {"CL", r.CL},
                                         {"CDi", r.CDi},
                                         {"CD0", r.CD0},
                                         {"CD", r.CD()},
                                         {"LD", r.LD}});
  log << "eval: CL " << io::format_double(r.CL) << " L/D " << io::format_double(r.LD) << '\n';
}

using Command = void (*)(const RunConfig&, const Args&, const fs::path&, std::ostream&);

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FFD-GAN wing parameterization toolkit", "ffdgan"};
  app.require_subcommand(1, 1);
  Args a;
  Overrides over;
  std::vector<std::pair<CLI::App*, Command>> commands;

  auto add = [&](const char* name, const char* help, Command fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", a.config_path, "run configuration document");
    sub->add_option("--out", a.out_dir, "output directory")->capture_default_str();
    over.add<std::uint64_t>(sub, "--seed", "random seed", [](RunConfig& c, const std::uint64_t& v) { c.seed = v; });
    over.add<unsigned>(sub, "--threads", "worker threads (0 = all cores)",
                       [](RunConfig& c, const unsigned& v) { c.threads = v; });
    commands.emplace_back(sub, fn);
    return sub;
  };
  auto dataset_opt = [&](CLI::App* sub) { sub->add_option("--dataset", a.dataset, "dataset header (.json)"); };
  auto param_opts = [&](CLI::App* sub) {
    sub->add_option("--param", a.param, "ffd, bspline or gan");
    sub->add_option("--param-def", a.param_def, "saved parameterization definition");
    sub->add_option("--checkpoint", a.checkpoint, "generator checkpoint (gan)");
    dataset_opt(sub);
  };

  auto* gen = add("gen-dataset", "synthesize a wing dataset", cmd_gen_dataset);
  over.add<std::size_t>(gen, "--count", "number of wings",
                        [](RunConfig& c, const std::size_t& v) { c.dataset_count = v; });

  auto* train = add("train", "train the generator", cmd_train);
  dataset_opt(train);
  over.add<int>(train, "--iters", "generator iterations", [](RunConfig& c, const int& v) { c.train.iterations = v; });
  over.add<std::size_t>(train, "--latent-dim", "latent dimension",
                        [](RunConfig& c, const std::size_t& v) { c.train.latent_dim = v; });

  auto* sample = add("sample", "decode random latent vectors to meshes", cmd_sample);
  sample->add_option("--checkpoint", a.checkpoint, "generator checkpoint");
  sample->add_option("--n", a.n, "number of samples")->capture_default_str();

  auto* traverse = add("traverse", "sweep one latent variable", cmd_traverse);
  traverse->add_option("--checkpoint", a.checkpoint, "generator checkpoint");
  traverse->add_option("--dim", a.dim, "latent index")->capture_default_str();
  traverse->add_option("--steps", a.steps, "shapes along the sweep")->capture_default_str();

  auto* fit = add("fit", "fit test-split targets (design-space coverage)", cmd_fit);
  param_opts(fit);
  over.add<std::size_t>(fit, "--targets", "number of test targets",
                        [](RunConfig& c, const std::size_t& v) { c.fit_targets = v; });

  auto* feas = add("feasibility", "Monte-Carlo feasibility ratio", cmd_feasibility);
  param_opts(feas);
  over.add<std::size_t>(feas, "--samples", "number of samples",
                        [](RunConfig& c, const std::size_t& v) { c.feasibility_samples = v; });

  auto* opt = add("optimize", "Bayesian lift-to-drag optimization", cmd_optimize);
  param_opts(opt);
  opt->add_option("--resume", a.resume, "state document to continue from");
  over.add<std::size_t>(opt, "--init", "Latin hypercube evaluations",
                        [](RunConfig& c, const std::size_t& v) { c.optimize.n_init = v; });
  over.add<std::size_t>(opt, "--iters", "GP-UCB evaluations",
                        [](RunConfig& c, const std::size_t& v) { c.optimize.n_seq = v; });

  auto* eval = add("eval", "lifting-line analysis of one wing", cmd_eval);
  dataset_opt(eval);
  eval->add_option("--obj", a.obj, "wing mesh (.obj)");
  eval->add_option("--index", a.index, "dataset wing index")->capture_default_str();
  over.add<double>(eval, "--alpha", "angle of attack, degrees",
                   [](RunConfig& c, const double& v) { c.eval_alpha_deg = v; });
  over.add<double>(eval, "--mach", "free-stream Mach number",
                   [](RunConfig& c, const double& v) { c.optimize.mach = v; });

  std::vector<std::string> argv_store{"ffdgan"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    bool known = false;
    for (const auto& [sub, f] : commands) known = known || sub->get_name() == args[0];
    if (!known) {
      err << "error: unknown command '" << args[0] << "'\n";
      return 2;
    }
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Command fn = nullptr;
  for (const auto& [sub, f] : commands) {
    if (sub->parsed()) fn = f;
  }

  try {
    RunConfig config;
    if (!a.config_path.empty()) config = run_config_from_json(io::read_json(a.config_path));
    over.apply(config);
    config.grammar.validate();
    config.train.validate();
    config.optimize.validate();

    const fs::path out_dir = a.out_dir;
    OutputGuard guard(out_dir);
    fn(config, a, out_dir, out);
    io::write_manifest(out_dir, argv_store, to_json(config), config.seed);
    guard.commit();
    return 0;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ffdgan::cli
