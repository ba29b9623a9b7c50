#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "zkl/linalg.hpp"
#include "zkl/rng.hpp"

namespace zkl {

/// Default concentration constant c(Q) for both Gaussian and Rademacher projections.
inline constexpr double kConcentrationConstant = 0.25;

struct JlBudget {
  std::size_t n = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double concentration_constant = kConcentrationConstant;
  std::size_t required_P = 0;
};

/// Smallest integer P with P >= (2 ln n + ln(1/δ)) / (c ε²), and at least 1.
/// Throws InvalidArgument unless n >= 1, ε ∈ (0,1), δ ∈ (0,1), c > 0.
std::size_t jl_required_p(std::size_t n, double epsilon, double delta, double c);
JlBudget jl_budget(std::size_t n, double epsilon, double delta, double c);

/// √((2 ln n + ln(1/δ)) / (c P)), the ε that P projections buy.
double jl_epsilon(std::size_t n, std::size_t P, double c, double delta);

struct PairDistortion {
  std::size_t i = 0;
  std::size_t j = 0;
  double distortion = 0.0;  // |⟨Uᵀω_i, Uᵀω_j⟩ − ⟨ω_i, ω_j⟩|
  double allowed = 0.0;     // (ε/2)(‖ω_i‖² + ‖ω_j‖²)
  bool within = true;
};

struct PreservationReport {
  std::vector<PairDistortion> pairs;  // all i <= j
  /// max over pairs of distortion / (½(‖ω_i‖² + ‖ω_j‖²)); the smallest ε the pairs satisfy.
  double epsilon_star = 0.0;
  std::size_t violations = 0;
  bool all_within() const noexcept { return violations == 0; }
};

/// Checks inner-product preservation for every pair (including i == j) of `points`
/// under ω ↦ Uᵀω. U is d×P.
PreservationReport check_inner_product_preservation(const std::vector<Vector>& points, const Matrix& U,
                                                    double epsilon);

/// ¼(‖Uᵀ(a+b)‖² − ‖Uᵀ(a−b)‖²).
double polarization_inner_product(const Matrix& U, std::span<const double> a, std::span<const double> b);

/// ε* from Gram matrices of the same vectors before and after projection:
/// max_{i<=j} |G'_{ij} − G_{ij}| / (½(G_ii + G_jj)). Pairs of zero vectors are skipped.
double epsilon_star(const Matrix& gram, const Matrix& projected_gram);

/// Tr(W)·I + 2W, the Gaussian fourth moment E[u uᵀ W u uᵀ].
Matrix gaussian_fourth_moment_target(const Matrix& W);
/// Monte-Carlo mean of u uᵀ W u uᵀ, u ~ N(0, I). W symmetric, d <= 64.
Matrix gaussian_fourth_moment_oracle(const Matrix& W, std::size_t samples, std::uint64_t seed);

/// (1 + 1/P)W + Tr(W)/P·I.
Matrix multi_perturbation_target(const Matrix& W, std::size_t P);
/// Monte-Carlo mean of Ū W Ū with Ū = (1/P) Σ_p u_p u_pᵀ, Gaussian u_p.
Matrix multi_perturbation_expectation_oracle(const Matrix& W, std::size_t P, std::size_t samples,
                                             std::uint64_t seed);

inline constexpr std::size_t kMaxEnumerationDim = 12;

/// (1/2^d) Σ over all sign vectors u of ⟨g,u⟩²‖u‖². Throws InvalidArgument for d > 12.
double rademacher_second_moment_exact(std::span<const double> g);

/// Monte-Carlo mean of ‖⟨g,u⟩u‖².
double second_moment_sampled(std::span<const double> g, Distribution dist, std::size_t samples,
                             std::uint64_t seed);

/// Fraction of trials with |‖Uᵀx‖² − 1| >= ε for a fixed unit x, U d×P drawn fresh per trial.
double projection_tail_frequency(std::size_t d, std::size_t P, double epsilon, Distribution dist,
                                 std::size_t trials, std::uint64_t seed);
/// 2·exp(−c P ε²).
double gaussian_tail_bound(std::size_t P, double epsilon, double c);
/// 2·exp(−P ε²/4 + P ε³/6).
double rademacher_tail_bound(std::size_t P, double epsilon);

/// ε*·Ξ·√V.
double delta_k_bound(double epsilon_star, double xi, std::size_t V);

struct DynamicsDiffBound {
  /// √(V ln V / P)·η·Ξ·‖G‖·‖A‖.
  double simplified = 0.0;
  /// jl_epsilon(V, P, c, δ)·√V·η·Ξ·‖G‖·‖A‖ = simplified·constant.
  double explicit_form = 0.0;
  /// √((2 + ln(1/δ)/ln V) / c).
  double constant = 0.0;
};

/// Requires V >= 2 and positive remaining arguments.
DynamicsDiffBound dynamics_diff_bound(std::size_t V, std::size_t P, double eta, double xi, double norm_g,
                                      double norm_a, double c, double delta);

}  // namespace zkl
