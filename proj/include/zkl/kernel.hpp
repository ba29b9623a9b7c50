#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "zkl/linalg.hpp"
#include "zkl/model.hpp"
#include "zkl/rng.hpp"

namespace zkl {

enum class KernelKind { FO, ZO };

std::string_view to_string(KernelKind k) noexcept;

struct KernelMeta {
  std::string input_o;
  std::string input_u;
  std::size_t P = 0;
  std::optional<Distribution> distribution;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

/// V×V eNTK between two inputs, K[i,j] = ⟨∇_θ z_i(x_o), ∇_θ z_j(x_u)⟩ (FO) or its
/// projected counterpart (ZO).
struct KernelMatrix {
  Matrix entries;
  KernelKind kind = KernelKind::FO;
  KernelMeta meta;

  std::size_t dim() const noexcept { return entries.rows(); }
};

/// U (d×P) with columns u_p/√P, plus where it came from.
struct PerturbationMatrix {
  Matrix entries;
  Distribution distribution = Distribution::Gaussian;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;

  std::size_t dim() const noexcept { return entries.rows(); }
  std::size_t count() const noexcept { return entries.cols(); }
};

PerturbationMatrix make_perturbation(std::uint64_t seed, std::uint64_t step, std::size_t d, std::size_t P,
                                     Distribution dist);

/// J_oᵀ J_u for dense d×V Jacobians.
KernelMatrix fo_entk(const Matrix& J_o, const Matrix& J_u);
/// Same kernel from per-layer factors: Σ_l (B_l^o B_l^uᵀ)·(⟨a_o, a_u⟩ + 1).
KernelMatrix fo_entk(const JacobianFactors& o, const JacobianFactors& u);

/// Uᵀ J, P×V.
Matrix projected_jacobian(const PerturbationMatrix& U, const Matrix& J);
Matrix projected_jacobian(const PerturbationMatrix& U, const JacobianFactors& f);

/// (UᵀJ_o)ᵀ(UᵀJ_u); U Uᵀ is never formed.
KernelMatrix zo_entk(const Matrix& J_o, const Matrix& J_u, const PerturbationMatrix& U);
KernelMatrix zo_entk(const JacobianFactors& o, const JacobianFactors& u, const PerturbationMatrix& U);
/// Kernel from already-projected Jacobians.
KernelMatrix zo_entk_from_projected(const Matrix& projected_o, const Matrix& projected_u,
                                    const PerturbationMatrix& U);

/// K_fo − K_zo.
Matrix kernel_discrepancy(const KernelMatrix& fo, const KernelMatrix& zo);

/// Ξ = max(‖J_o‖_F², ‖J_u‖_F²).
double jacobian_scale(const Matrix& J_o, const Matrix& J_u);
double jacobian_scale(const JacobianFactors& o, const JacobianFactors& u);

}  // namespace zkl
