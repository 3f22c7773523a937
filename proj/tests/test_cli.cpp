#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "routeopt/text_io.hpp"

// End-to-end checks of the command-line binary (path injected by CMake).

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args, const std::string& capture_file = "") {
  std::string cmd = std::string(ROUTEOPT_CLI_PATH) + " " + args;
  if (!capture_file.empty()) cmd += " >" + capture_file + " 2>&1";
  else cmd += " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli help and error contracts") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("generate-network --help") == 0);
  CHECK(run_cli("compare --help") == 0);
  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("generate-network --no-such-flag") != 0);

  TempDir tmp("routeopt_cli_err");
  std::string capture = tmp.file("err.txt");
  CHECK(run_cli("compare --config /nonexistent/path.cfg --out-dir " + tmp.file("out"), capture) != 0);
  auto text = routeopt::read_file(capture);
  CHECK(text.find("/nonexistent/path.cfg") != std::string::npos);
}

TEST_CASE("cli network generation is deterministic per seed") {
  TempDir tmp("routeopt_cli_net");
  CHECK(run_cli("generate-network --seed 41 --out " + tmp.file("a.txt")) == 0);
  CHECK(run_cli("generate-network --seed 41 --out " + tmp.file("b.txt")) == 0);
  CHECK(run_cli("generate-network --seed 42 --out " + tmp.file("c.txt")) == 0);
  auto a = routeopt::read_file(tmp.file("a.txt"));
  CHECK(a == routeopt::read_file(tmp.file("b.txt")));
  CHECK(a != routeopt::read_file(tmp.file("c.txt")));
}

TEST_CASE("cli pipeline on a small config") {
  TempDir tmp("routeopt_cli_pipe");
  std::string cfg_path = tmp.file("small.cfg");
  routeopt::write_file(cfg_path,
                       "[behavior]\n"
                       "n_per_demand = 4\n"
                       "[ml]\n"
                       "history_days = 5\n"
                       "trees = 8\n"
                       "grid = 6:5\n"
                       "[experiment]\n"
                       "replications = 2\n"
                       "scenarios = perfect,known,selfish\n");

  CHECK(run_cli("optimize-flow --config " + cfg_path + " --out " + tmp.file("sol.txt")) == 0);
  CHECK(fs::exists(tmp.file("sol.txt")));

  CHECK(run_cli("simulate-history --config " + cfg_path + " --out " + tmp.file("hist.csv")) == 0);
  auto hist = routeopt::read_file(tmp.file("hist.csv"));
  CHECK(hist.rfind("# routeopt-history v1", 0) == 0);

  CHECK(run_cli("train-compliance --config " + cfg_path + " --history " + tmp.file("hist.csv") +
                " --out " + tmp.file("model.txt")) == 0);
  CHECK(routeopt::read_file(tmp.file("model.txt")).rfind("routeopt-forest v1", 0) == 0);

  CHECK(run_cli("recommend --config " + cfg_path + " --oracle perfect --out " +
                tmp.file("asg.csv")) == 0);
  auto asg = routeopt::read_file(tmp.file("asg.csv"));
  CHECK(asg.rfind("traveler,recommended_path,phi_hat,scenario", 0) == 0);

  CHECK(run_cli("run-scenario --config " + cfg_path + " --scenario selfish --out-dir " +
                tmp.file("scen")) == 0);
  CHECK(fs::exists(tmp.file("scen") + "/scenario_selfish.csv"));

  CHECK(run_cli("compare --config " + cfg_path + " --out-dir " + tmp.file("cmp")) == 0);
  CHECK(fs::exists(tmp.file("cmp") + "/comparison.csv"));
  CHECK(fs::exists(tmp.file("cmp") + "/manifest.txt"));
  CHECK(fs::exists(tmp.file("cmp") + "/flow_diff.svg"));

  CHECK(run_cli("report --replications " + tmp.file("cmp") + "/replications.csv --out-dir " +
                tmp.file("rebuilt")) == 0);
  CHECK(routeopt::read_file(tmp.file("rebuilt") + "/comparison.csv") ==
        routeopt::read_file(tmp.file("cmp") + "/comparison.csv"));
}

TEST_CASE("cli honors the output root environment variable") {
  TempDir tmp("routeopt_cli_root");
  std::string cmd = std::string("ROUTEOPT_OUT_ROOT=") + tmp.path.string() + " " +
                    ROUTEOPT_CLI_PATH + " generate-network --seed 5 --out rooted.txt >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(tmp.file("rooted.txt")));
}
