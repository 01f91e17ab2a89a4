#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ffdgan/aero.hpp"
#include "ffdgan/cli.hpp"
#include "ffdgan/io.hpp"

using namespace ffdgan;
namespace fs = std::filesystem;

namespace {

const fs::path& root() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "ffdgan_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "small.json") << R"({
      "grammar": {"sections_out": 9, "points_out": 65},
      "train": {"batch_size": 16, "generator_hidden": [32, 32], "critic_hidden": [32, 16],
                "latent_dim": 3, "lattice": [2, 3, 1]},
      "ffd": {"lattice": [1, 2, 1]},
      "bspline": {"n_u": 10},
      "fit": {"gan_steps": 20, "gan_restarts": 2},
      "optimize": {"n_init": 3, "n_seq": 3}
    })";
    return d;
  }();
  return dir;
}

struct Run {
  int status;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::string p(const std::string& name) { return (root() / name).string(); }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Dataset and checkpoint shared by the tests below.
void prepare() {
  static bool done = false;
  if (done) return;
  REQUIRE(run({"gen-dataset", "--count", "40", "--seed", "1", "--config", p("small.json"), "--out", p("ds")})
              .status == 0);
  REQUIRE(run({"train", "--dataset", p("ds/dataset.json"), "--iters", "20", "--config", p("small.json"),
               "--out", p("tr")})
              .status == 0);
  done = true;
}

}  // namespace

TEST_CASE("gen-dataset: 80/20 split and a manifest") {
  const auto r = run({"gen-dataset", "--count", "20", "--seed", "1", "--config", p("small.json"), "--out",
                      p("ds20")});
  REQUIRE(r.status == 0);
  const auto data = io::load_dataset(root() / "ds20/dataset.json");
  CHECK(data.train.size() == 16);
  CHECK(data.test.size() == 4);
  const auto manifest = io::read_json(root() / "ds20/manifest.json");
  CHECK(manifest["seed"] == 1);
  CHECK(manifest["config"]["grammar"]["points_out"] == 65);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
  CHECK(manifest.contains("code_version"));
  CHECK(manifest["argv"][1] == "gen-dataset");
}

TEST_CASE("flags override config values") {
  const auto r = run({"gen-dataset", "--count", "10", "--seed", "4", "--config", p("small.json"), "--out",
                      p("ds10")});
  REQUIRE(r.status == 0);
  const auto manifest = io::read_json(root() / "ds10/manifest.json");
  CHECK(manifest["config"]["dataset"]["count"] == 10);
  CHECK(manifest["config"]["seed"] == 4);
  CHECK(io::load_dataset(root() / "ds10/dataset.json").grids.size() == 10);
}

TEST_CASE("bad commands and configs fail with a message and leave nothing behind") {
  auto r = run({"frobnicate"});
  CHECK(r.status != 0);
  CHECK(r.err.find("unknown command") != std::string::npos);

  r = run({"fit", "--no-such-flag"});
  CHECK(r.status != 0);
  CHECK_FALSE(r.err.empty());

  std::ofstream(root() / "bad.json") << R"({"grammar": {"sections": 3}})";
  r = run({"gen-dataset", "--config", p("bad.json"), "--out", p("bad_out")});
  CHECK(r.status != 0);
  CHECK(r.err.find("unknown key 'sections'") != std::string::npos);
  CHECK_FALSE(fs::exists(root() / "bad_out"));

  std::ofstream(root() / "broken.json") << "{ nope";
  r = run({"gen-dataset", "--config", p("broken.json"), "--out", p("bad_out")});
  CHECK(r.status != 0);
  CHECK_FALSE(fs::exists(root() / "bad_out"));

  r = run({"gen-dataset", "--config", p("missing.json"), "--out", p("bad_out")});
  CHECK(r.status != 0);
}

TEST_CASE("partial outputs of a failed command are removed") {
  prepare();
  fs::create_directories(root() / "keep");
  std::ofstream(root() / "keep/existing.txt") << "x";
  // The fit fails after the parameterization is built: more targets than the
  // test split holds.
  const auto r = run({"fit", "--param", "ffd", "--dataset", p("ds/dataset.json"), "--targets", "999",
                      "--config", p("small.json"), "--out", p("keep")});
  CHECK(r.status != 0);
  CHECK(fs::exists(root() / "keep/existing.txt"));
  CHECK(std::distance(fs::directory_iterator(root() / "keep"), fs::directory_iterator{}) == 1);
}

TEST_CASE("sample: OBJ wings that pass the geometric check") {
  prepare();
  const auto r = run({"sample", "--checkpoint", p("tr/generator.ckpt"), "--n", "4", "--seed", "2", "--out",
                      p("sm")});
  REQUIRE(r.status == 0);
  for (int i = 0; i < 4; ++i) {
    const auto g = io::import_obj(root() / ("sm/sample_000" + std::to_string(i) + ".obj"));
    CHECK(g.sections() == 9);
    CHECK(g.points_per_section() == 65);
    CHECK_FALSE(geom::self_intersection_check(g));
  }
  const auto csv = slurp(root() / "sm/samples.csv");
  CHECK(csv.rfind("sample_id,z0,z1,z2,geometric_ok\n", 0) == 0);
}

TEST_CASE("traverse: one multi-object OBJ") {
  prepare();
  const auto r = run({"traverse", "--checkpoint", p("tr/generator.ckpt"), "--dim", "2", "--steps", "5",
                      "--out", p("tv")});
  REQUIRE(r.status == 0);
  std::ifstream in(root() / "tv/traverse_z2.obj");
  std::string line;
  int objects = 0;
  while (std::getline(in, line)) objects += line.rfind("o ", 0) == 0 ? 1 : 0;
  CHECK(objects == 5);
  CHECK(run({"traverse", "--checkpoint", p("tr/generator.ckpt"), "--dim", "3", "--out", p("tv_bad")}).status != 0);
  CHECK_FALSE(fs::exists(root() / "tv_bad"));
}

TEST_CASE("every command reproduces its CSV outputs byte for byte") {
  prepare();
  const std::string cfg = p("small.json"), ds = p("ds/dataset.json"), ck = p("tr/generator.ckpt");
  const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> cases{
      {{"train", "--dataset", ds, "--iters", "5", "--seed", "3", "--config", cfg}, {"loss.csv"}},
      {{"sample", "--checkpoint", ck, "--n", "3", "--seed", "5"}, {"samples.csv"}},
      {{"fit", "--param", "ffd", "--dataset", ds, "--targets", "3", "--config", cfg}, {"fit.csv"}},
      {{"fit", "--param", "bspline", "--dataset", ds, "--targets", "2", "--config", cfg}, {"fit.csv"}},
      {{"fit", "--param", "gan", "--checkpoint", ck, "--dataset", ds, "--targets", "3", "--config", cfg},
       {"fit.csv"}},
      {{"feasibility", "--param", "ffd", "--dataset", ds, "--samples", "30", "--seed", "7", "--config", cfg},
       {"feasibility.csv", "summary.json"}},
      {{"feasibility", "--param", "gan", "--checkpoint", ck, "--samples", "30", "--seed", "7", "--threads", "3"},
       {"feasibility.csv", "summary.json"}},
      {{"optimize", "--param", "ffd", "--dataset", ds, "--seed", "2", "--config", cfg}, {"history.csv"}},
      {{"eval", "--dataset", ds, "--index", "3", "--alpha", "4"}, {"eval.json"}},
  };
  int k = 0;
  for (const auto& [args, files] : cases) {
    CAPTURE(args[0]);
    std::vector<std::string> a = args, b = args;
    const auto da = "det_a" + std::to_string(k), db = "det_b" + std::to_string(k);
    a.insert(a.end(), {"--out", p(da)});
    b.insert(b.end(), {"--out", p(db)});
    const auto ra = run(a), rb = run(b);
    REQUIRE_MESSAGE(ra.status == 0, ra.err);
    REQUIRE(rb.status == 0);
    for (const auto& f : files) {
      const auto sa = slurp(root() / da / f);
      CHECK_FALSE(sa.empty());
      CHECK(sa == slurp(root() / db / f));
    }
    ++k;
  }
}

TEST_CASE("feasibility reuses a saved parameterization definition") {
  prepare();
  const std::string ds = p("ds/dataset.json");
  REQUIRE(run({"feasibility", "--param", "bspline", "--dataset", ds, "--samples", "10", "--seed", "1", "--config",
               p("small.json"), "--out", p("fd_a")})
              .status == 0);
  REQUIRE(run({"feasibility", "--param-def", p("fd_a/param.json"), "--samples", "10", "--seed", "1", "--out",
               p("fd_b")})
              .status == 0);
  CHECK(slurp(root() / "fd_a/feasibility.csv") == slurp(root() / "fd_b/feasibility.csv"));
  CHECK(run({"feasibility", "--param", "ffd", "--param-def", p("fd_a/param.json"), "--out", p("fd_c")}).status !=
        0);
}

TEST_CASE("optimize: a run resumed from its state document matches the uninterrupted run") {
  prepare();
  const std::string ds = p("ds/dataset.json"), cfg = p("small.json");
  REQUIRE(run({"optimize", "--param", "ffd", "--dataset", ds, "--seed", "8", "--config", cfg, "--out", p("opt_full")})
              .status == 0);
  REQUIRE(run({"optimize", "--param", "ffd", "--dataset", ds, "--seed", "8", "--config", cfg, "--iters", "1",
               "--out", p("opt_part")})
              .status == 0);
  REQUIRE(run({"optimize", "--param", "ffd", "--dataset", ds, "--seed", "8", "--config", cfg, "--resume",
               p("opt_part/state.json"), "--out", p("opt_resumed")})
              .status == 0);
  CHECK(slurp(root() / "opt_full/history.csv") == slurp(root() / "opt_resumed/history.csv"));
  CHECK(run({"optimize", "--param", "ffd", "--dataset", ds, "--seed", "9", "--config", cfg, "--resume",
             p("opt_part/state.json"), "--out", p("opt_bad")})
            .status != 0);
}

TEST_CASE("eval: AeroResult document for a dataset wing matches the library") {
  prepare();
  REQUIRE(run({"eval", "--dataset", p("ds/dataset.json"), "--index", "0", "--out", p("ev")}).status == 0);
  const auto j = io::read_json(root() / "ev/eval.json");
  const auto data = io::load_dataset(root() / "ds/dataset.json");
  const auto r = aero::lifting_line_solve(data.grids[0], aero::FlowCondition{0.4, 2.0, false});
  CHECK(j["CL"].get<double>() == r.CL);
  CHECK(j["LD"].get<double>() == r.LD);
  CHECK(j["CD"].get<double>() == doctest::Approx(r.CDi + r.CD0));
  CHECK(j["geometric_ok"] == true);
}
