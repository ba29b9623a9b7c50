#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "zkl/data.hpp"
#include "zkl/kernel.hpp"
#include "zkl/model.hpp"
#include "zkl/rng.hpp"

namespace zkl {

struct OptimConfig {
  double eta = 1e-2;
  /// Central-difference step. 1e-3 suits tanh nets in double precision.
  double mu = 1e-3;
  std::size_t P = 1;
  Distribution distribution = Distribution::Gaussian;
  std::size_t steps = 1;
  std::uint64_t master_seed = 0;

  /// eta >= 0 (zero is allowed for control runs), mu > 0, P >= 1, steps >= 1.
  void validate() const;
};

enum class Algorithm { FO, ZO };
std::string_view to_string(Algorithm a) noexcept;

using LossFn = std::function<double(std::span<const double>)>;

/// (ℓ(θ+μu) − ℓ(θ−μu)) / 2μ. Throws NumericError when either loss is non-finite.
double spsa_coefficient(const LossFn& loss, std::span<const double> theta, std::span<const double> u, double mu);

struct ZoStep {
  ParamVector theta;
  /// Columns u_p/√P, so zo_entk(J_o, J_u, U) is the kernel this step realised.
  PerturbationMatrix U;
  Vector coefficients;
};

/// θ − (η/P) Σ_p c_p u_p with u_p drawn from StreamKey{master_seed, step, p, Perturbation}.
/// Coefficients are accumulated in increasing p.
ZoStep zo_sgd_step(const LossFn& loss, std::span<const double> theta, const OptimConfig& cfg, std::uint64_t step);

ParamVector fo_sgd_step(std::span<const double> theta, std::span<const double> grad, double eta);

/// Dataset indices visited at each step: one permutation per epoch from the DataOrder stream.
std::vector<std::size_t> sample_order(std::size_t dataset_size, std::size_t steps, std::uint64_t seed);

struct TrajectoryStep {
  std::size_t step = 0;
  /// Loss of the step's training sample before the update.
  double loss = 0.0;
  double update_norm = 0.0;
  /// Probe logits/beliefs after the update.
  std::vector<Vector> probe_logits;
  std::vector<Vector> probe_beliefs;
};

struct TrajectoryRecord {
  Algorithm algorithm = Algorithm::FO;
  OptimConfig optim;
  std::vector<TrajectoryStep> steps;
  bool diverged = false;
};

/// Losses above this (or non-finite) stop the run and flag the record.
inline constexpr double kDivergenceLoss = 1e6;

/// Runs `optim.steps` single-sample updates visiting sample_order(data.size(), steps, optim.master_seed).
/// FO and ZO runs with the same master_seed see the same sample sequence.
TrajectoryRecord run_trajectory(const MlpConfig& model, std::span<const double> theta0, const Dataset& data,
                                const OptimConfig& optim, Algorithm algorithm, const std::vector<Vector>& probes);

}  // namespace zkl
