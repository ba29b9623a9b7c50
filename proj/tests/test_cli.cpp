#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "zkl_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + ZKL_CLI_PATH + "\" " + args + " > \"" + (kWork / "stdout.txt").string() +
                          "\" 2> \"" + (kWork / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const json& j) {
  const fs::path p = kWork / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

const json kSmallModel{{"input_dim", 8}, {"hidden_dims", {16}}, {"output_dim", 3}};

}  // namespace

TEST_CASE("cli smoke and exit codes") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);

  CHECK(run("jl-budget") == 0);
  CHECK(json::parse(slurp(kWork / "stdout.txt")).at("required_P") == 148);
  CHECK(run("jl-budget --n 10 --epsilon 0.5 --delta 0.01 --c 0.25 --out \"" + (kWork / "jl").string() + "\"") == 0);
  CHECK(fs::exists(kWork / "jl" / "jl_budget.json"));
  CHECK(fs::exists(kWork / "jl" / "run_config.json"));

  CHECK(run("jl-budget --epsilon 1.5") == 2);
  CHECK(run("kernel-compare --config \"" + (kWork / "nope.json").string() + "\"") == 2);

  std::ofstream(kWork / "broken.json") << "{ not json";
  CHECK(run("trajectory --config \"" + (kWork / "broken.json").string() + "\"") == 2);

  const fs::path dup = write_config("dup.json", json{{"seeds", {3, 3}}});
  CHECK(run("kernel-compare --config \"" + dup.string() + "\"") == 2);
  CHECK(slurp(kWork / "stderr.txt").find("config.seeds[1]") != std::string::npos);

  CHECK(run("") != 0);
  CHECK(run("plot") != 0);
}

TEST_CASE("moment-check exit status follows the report") {
  fs::create_directories(kWork);
  const json fast{{"fourth_samples", 20000}, {"multi_samples", 20000}, {"second_samples", 20000},
                  {"fourth_tol", 0.15},      {"multi_tol", 0.15},      {"second_tol", 0.1},
                  {"tail_trials", 2000}};
  const fs::path ok = write_config("mc_ok.json", json{{"moment", fast}});
  CHECK(run("moment-check --config \"" + ok.string() + "\" --out \"" + (kWork / "mc_ok").string() + "\"") == 0);

  json bad = fast;
  bad["c"] = 10.0;
  const fs::path wrong = write_config("mc_bad.json", json{{"moment", bad}});
  CHECK(run("moment-check --config \"" + wrong.string() + "\" --out \"" + (kWork / "mc_bad").string() + "\"") == 1);
}

TEST_CASE("reruns are byte-identical regardless of thread count") {
  fs::create_directories(kWork);
  const fs::path kc = write_config(
      "kc.json", json{{"model", kSmallModel}, {"P_sweep", {1, 8}}, {"seeds", {1, 2, 3}}, {"dump_kernels", true}});
  const fs::path tr = write_config(
      "tr.json", json{{"model", kSmallModel}, {"optim", {{"steps", 10}}}, {"P_sweep", {1, 4}}, {"seeds", {1, 2}}});

  struct Case {
    std::string command;
    fs::path config;
    std::vector<std::string> files;
  };
  const std::vector<Case> cases = {
      {"kernel-compare", kc, {"kernel_compare.csv", "bounds.json", "kernel_compare_summary.json"}},
      {"trajectory", tr, {"trajectory.csv", "trajectory_summary.json"}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.command);
    const fs::path a = kWork / (c.command + "_a"), b = kWork / (c.command + "_b");
    CHECK(run(c.command + " --config \"" + c.config.string() + "\" --out \"" + a.string() + "\" --threads 1") == 0);
    CHECK(run(c.command + " --config \"" + c.config.string() + "\" --out \"" + b.string() + "\" --threads 3") == 0);
    for (const auto& f : c.files) {
      CAPTURE(f);
      const std::string first = slurp(a / f);
      CHECK(!first.empty());
      CHECK(first == slurp(b / f));
    }
  }

  const fs::path s1 = kWork / "seed1", s2 = kWork / "seed2";
  CHECK(run("kernel-compare --config \"" + kc.string() + "\" --seed 1 --out \"" + s1.string() + "\"") == 0);
  CHECK(run("kernel-compare --config \"" + kc.string() + "\" --seed 2 --out \"" + s2.string() + "\"") == 0);
  CHECK(slurp(s1 / "kernel_compare.csv") != slurp(s2 / "kernel_compare.csv"));
  CHECK(json::parse(slurp(s2 / "run_config.json")).at("seed") == 2);
}
