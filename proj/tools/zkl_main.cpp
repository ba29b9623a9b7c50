#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "zkl/error.hpp"
#include "zkl/experiments.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON config file");
  cmd->add_option("--out", flags.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", flags.seed, "Master seed (overrides config)");
  cmd->add_option("--threads", flags.threads, "Worker threads (overrides config)")->check(CLI::PositiveNumber);
}

zkl::ExperimentConfig resolve(const std::string& experiment, const CommonFlags& flags,
                              const zkl::json& overrides = zkl::json::object()) {
  zkl::json j = zkl::json::object();
  if (!flags.config.empty()) {
    std::ifstream in(flags.config);
    if (!in) throw zkl::InvalidArgument("--config: cannot open " + flags.config);
    try {
      j = zkl::json::parse(in);
    } catch (const zkl::json::parse_error& e) {
      throw zkl::InvalidArgument("--config: " + std::string(e.what()));
    }
  }
  if (!j.is_object()) throw zkl::InvalidArgument("config: expected a JSON object");
  if (flags.seed) j["seed"] = *flags.seed;
  if (flags.threads) j["threads"] = *flags.threads;
  j.update(overrides);
  return zkl::config_from_json(j, experiment);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zeroth-order vs first-order empirical NTK experiments"};
  app.require_subcommand(1);

  CommonFlags kc, tr, vs, mc, jl;
  auto* kernel_compare = app.add_subcommand("kernel-compare", "Compare FO and projected kernels over a P sweep");
  add_common(kernel_compare, kc);
  auto* trajectory = app.add_subcommand("trajectory", "FO baseline vs ZO-SGD belief trajectories");
  add_common(trajectory, tr);
  auto* v_scaling = app.add_subcommand("v-scaling", "Kernel error against output size");
  add_common(v_scaling, vs);
  auto* moment_check = app.add_subcommand("moment-check", "Monte-Carlo and exact moment identities");
  add_common(moment_check, mc);
  auto* jl_budget = app.add_subcommand("jl-budget", "Perturbation budget for a target distortion");
  add_common(jl_budget, jl);
  std::optional<std::size_t> jl_n;
  std::optional<double> jl_eps, jl_delta, jl_c;
  jl_budget->add_option("--n", jl_n, "Number of points");
  jl_budget->add_option("--epsilon", jl_eps, "Target distortion in (0,1)");
  jl_budget->add_option("--delta", jl_delta, "Failure probability in (0,1)");
  jl_budget->add_option("--c", jl_c, "Concentration constant");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*kernel_compare) {
      const auto cfg = resolve("kernel-compare", kc);
      const auto result = zkl::run_kernel_compare(cfg, kc.out);
      std::cout << "kernel-compare: " << result.cells.size() << " rows, " << result.medians.size()
                << " medians -> " << kc.out << "\n";
    } else if (*trajectory) {
      const auto cfg = resolve("trajectory", tr);
      const auto result = zkl::run_trajectory_experiment(cfg, tr.out);
      std::size_t diverged = 0;
      for (const auto& r : result.runs) diverged += r.record.diverged ? 1 : 0;
      std::cout << "trajectory: " << result.runs.size() << " runs (" << diverged << " diverged) -> " << tr.out
                << "\n";
      for (const auto& [key, gap] : result.median_final_gap) std::cout << "  " << key << " median final gap " << gap << "\n";
    } else if (*v_scaling) {
      const auto cfg = resolve("v-scaling", vs);
      const auto result = zkl::run_v_scaling(cfg, vs.out);
      for (const auto& m : result.medians) {
        std::cout << "V=" << m.V << " " << zkl::to_string(m.distribution) << " k=" << m.diff_norm
                  << " f=" << m.fo_norm << " rel=" << m.rel_error << "\n";
      }
    } else if (*moment_check) {
      const auto cfg = resolve("moment-check", mc);
      const auto report = zkl::run_moment_check(cfg, mc.out);
      std::cout << report.dump(2) << "\n";
      return report["passed"].get<bool>() ? 0 : 1;
    } else if (*jl_budget) {
      zkl::json overrides = zkl::json::object();
      if (jl_n) overrides["n"] = *jl_n;
      if (jl_eps) overrides["epsilon"] = *jl_eps;
      if (jl_delta) overrides["delta"] = *jl_delta;
      if (jl_c) overrides["c"] = *jl_c;
      const auto cfg = resolve("jl-budget", jl, overrides);
      const bool explicit_out = jl_budget->count("--out") > 0;
      const auto report = zkl::run_jl_budget(cfg, explicit_out ? std::filesystem::path(jl.out) : std::filesystem::path{});
      std::cout << report.dump(2) << "\n";
    }
  } catch (const zkl::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
