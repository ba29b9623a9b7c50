#include "zkl/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "zkl/error.hpp"

namespace zkl {

Matrix belief_update_matrix(std::span<const double> belief) {
  const std::size_t V = belief.size();
  Matrix A = Matrix::identity(V);
  for (std::size_t i = 0; i < V; ++i)
    for (std::size_t j = 0; j < V; ++j) A(i, j) -= belief[j];
  return A;
}

Vector predict_dynamics(const DynamicsDecomposition& decomp) {
  const std::size_t V = decomp.G.size();
  if (decomp.K.rows() != V || decomp.K.cols() != V || decomp.A.rows() != V || decomp.A.cols() != V) {
    throw InvalidArgument("predict_dynamics: A, K and G disagree on V");
  }
  Vector out = matvec(decomp.A, matvec(decomp.K, decomp.G));
  for (double& v : out) v *= -decomp.eta;
  return out;
}

Vector actual_dynamics(std::span<const double> theta_before, std::span<const double> theta_after,
                       const MlpConfig& cfg, std::span<const double> x_o) {
  const Vector before = log_softmax(forward_logits(theta_before, cfg, x_o));
  Vector after = log_softmax(forward_logits(theta_after, cfg, x_o));
  for (std::size_t i = 0; i < after.size(); ++i) after[i] -= before[i];
  return after;
}

double dynamics_residual(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw InvalidArgument("dynamics_residual: length mismatch");
  double r = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) r = std::max(r, std::abs(predicted[i] - actual[i]));
  return r;
}

}  // namespace zkl
