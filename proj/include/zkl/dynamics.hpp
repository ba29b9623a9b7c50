#pragma once

#include <span>

#include "zkl/linalg.hpp"
#include "zkl/model.hpp"

namespace zkl {

/// One-step decomposition Δ log π(·|x_o) ≈ −η A K G.
struct DynamicsDecomposition {
  Matrix A;  // I − 𝟙πᵀ at x_o
  Matrix K;  // V×V kernel K(x_o, x_u), FO or projected
  Vector G;  // ∇_z L(z(x_u), y_u)
  double eta = 0.0;
};

/// I − 𝟙πᵀ. Every row sums to zero when π sums to one.
Matrix belief_update_matrix(std::span<const double> belief);

/// −η·A·K·G. Throws InvalidArgument on inconsistent shapes.
Vector predict_dynamics(const DynamicsDecomposition& decomp);

/// log softmax(z_after) − log softmax(z_before) at x_o.
Vector actual_dynamics(std::span<const double> theta_before, std::span<const double> theta_after,
                       const MlpConfig& cfg, std::span<const double> x_o);

/// Max-abs difference between predicted and actual per-class changes.
double dynamics_residual(std::span<const double> predicted, std::span<const double> actual);

}  // namespace zkl
