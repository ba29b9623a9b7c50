#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "zkl/bounds.hpp"
#include "zkl/data.hpp"
#include "zkl/io.hpp"
#include "zkl/metrics.hpp"
#include "zkl/model.hpp"
#include "zkl/optim.hpp"

namespace zkl {

struct DataConfig {
  std::string kind = "blobs";  // "blobs" | "idx"
  std::size_t per_class = 8;
  double separation = 4.0;
  std::string images;  // idx only
  std::string labels;  // idx only
  /// Per-feature standardisation. Changes Jacobian scales, so it is opt-in.
  bool normalize = false;
};

struct MomentCheckConfig {
  std::size_t fourth_dim = 8;
  std::size_t fourth_samples = 200000;
  std::vector<std::size_t> multi_P = {1, 2, 8};
  std::size_t multi_samples = 100000;
  std::size_t second_dim = 64;
  std::size_t second_samples = 100000;
  std::size_t enum_min_dim = 2;
  std::size_t enum_max_dim = 12;
  double fourth_tol = 0.05;
  double multi_tol = 0.05;
  double second_tol = 0.03;
  double enum_tol = 1e-12;
  /// Replace W and g by zero (edge case: all targets vanish).
  bool zero_inputs = false;
  double tail_epsilon = 0.3;
  std::vector<std::size_t> tail_P = {32, 128};
  std::size_t tail_trials = 10000;
  std::size_t tail_dim = 64;
  double tail_slack = 1.5;
  double concentration_constant = 0.25;
};

struct ExperimentConfig {
  std::string experiment = "kernel-compare";
  /// Seeds dataset generation.
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  MlpConfig model;
  DataConfig data;
  OptimConfig optim;
  std::size_t pairs = 1;
  std::vector<std::size_t> P_sweep = {1, 4, 16, 64, 256, 1024};
  std::vector<Distribution> distributions = {Distribution::Gaussian, Distribution::Rademacher};
  /// Projection seeds (kernel-compare, v-scaling) or run seeds (trajectory).
  std::vector<std::uint64_t> seeds = {0};
  std::vector<std::size_t> V_sweep = {2, 10, 100, 500, 1000};
  std::size_t fixed_P = 50;
  bool dump_kernels = false;
  std::size_t probes = 4;
  /// trajectory: replace every ZO run with an FO run (all gaps must be zero).
  bool fo_control = false;
  MomentCheckConfig moment;
  // jl-budget
  std::size_t jl_n = 10;
  double jl_epsilon = 0.5;
  double jl_delta = 0.01;
  double jl_c = 0.25;
};

/// Defaults for one experiment kind ("kernel-compare", "trajectory", "v-scaling",
/// "moment-check", "jl-budget").
ExperimentConfig default_config(const std::string& experiment);

/// Overlays `j` on default_config(experiment). Throws InvalidArgument naming the
/// offending field path (e.g. "config.P_sweep[2]").
ExperimentConfig config_from_json(const json& j, const std::string& experiment);
json config_to_json(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);

Dataset make_dataset(const ExperimentConfig& cfg, std::size_t num_classes);

// ---- kernel-compare ----

struct KernelCompareCell {
  MetricReport report;
  double epsilon_star = 0.0;
  double xi = 0.0;
  double delta_k_norm = 0.0;
  double delta_k_bound = 0.0;
  double predicted_diff_norm = 0.0;  // ‖η A ΔK G‖₂
  DynamicsDiffBound diff_bound;
};

struct MedianRow {
  std::string pair_id;
  Distribution distribution = Distribution::Gaussian;
  std::size_t P = 0;
  double rel_frobenius = 0.0;
  double cka_error = 0.0;
  double spectral_distance = 0.0;
};

struct KernelCompareResult {
  std::vector<KernelCompareCell> cells;  // sorted by (pair, distribution, P, seed)
  std::vector<MedianRow> medians;        // sorted by (pair, distribution, P)
  /// "pair/distribution/metric" → least-squares slope of log(median) against log(P).
  std::map<std::string, double> slopes;
  double a_norm = 0.0;  // ‖A‖₂ of the first pair, logged only
};

KernelCompareResult run_kernel_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// ---- trajectory ----

struct TrajectoryRun {
  Algorithm algorithm = Algorithm::ZO;
  std::size_t P = 0;
  Distribution distribution = Distribution::Gaussian;
  std::uint64_t seed = 0;
  TrajectoryRecord record;
  /// gaps[t][probe] = ‖π_run − π_FO‖₂ at step t.
  std::vector<std::vector<double>> gaps;
  double final_gap = 0.0;  // mean over probes at the last common step
};

struct TrajectoryResult {
  std::vector<TrajectoryRun> baselines;  // one FO run per seed
  std::vector<TrajectoryRun> runs;       // sorted by (distribution, P, seed)
  /// "distribution/P" → median final gap over seeds.
  std::map<std::string, double> median_final_gap;
};

TrajectoryResult run_trajectory_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// ---- v-scaling ----

struct VScalingRow {
  std::size_t V = 0;
  std::size_t P = 0;
  Distribution distribution = Distribution::Gaussian;
  std::uint64_t seed = 0;
  double diff_norm = 0.0;
  double fo_norm = 0.0;
  double rel_error = 0.0;
};

struct VScalingResult {
  std::vector<VScalingRow> rows;
  std::vector<VScalingRow> medians;  // one per (distribution, V); seed unused
};

VScalingResult run_v_scaling(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// ---- moment-check / jl-budget ----

/// Every check carries {name, measured, target, error, tolerance, passed}; top-level "passed".
json run_moment_check(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
json run_jl_budget(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Median of a non-empty sample (mean of the two middle values for even sizes).
double median(std::vector<double> v);
/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace zkl
