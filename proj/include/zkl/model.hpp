#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "zkl/linalg.hpp"

namespace zkl {

/// tanh is the default. relu is non-smooth at 0, so Taylor-remainder tests
/// (finite differences, η-halving) are only meaningful away from kinks.
enum class Activation { Tanh, Relu };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

struct MlpConfig {
  std::size_t input_dim = 64;
  std::vector<std::size_t> hidden_dims = {128};
  std::size_t output_dim = 10;
  Activation activation = Activation::Tanh;
  double init_scale = 1.0;
  std::uint64_t init_seed = 0;

  /// Throws InvalidArgument unless output_dim >= 2 and every dim >= 1.
  void validate() const;
  std::size_t num_layers() const noexcept { return hidden_dims.size() + 1; }
  std::size_t param_count() const;

  bool operator==(const MlpConfig&) const = default;
};

using ParamVector = Vector;
using LogitVector = Vector;
using BeliefVector = Vector;

/// Location of one affine layer inside the flat parameter vector.
/// Flattening order is frozen: layer by layer, weight (out×in, row-major) then bias.
struct LayerSlice {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

std::vector<LayerSlice> layer_slices(const MlpConfig& cfg);

struct LayerParams {
  Matrix weight;  // out × in
  Vector bias;    // out
};

std::vector<LayerParams> unflatten(std::span<const double> theta, const MlpConfig& cfg);
ParamVector flatten(std::span<const LayerParams> layers);

/// Weights ~ N(0,1)·init_scale/√fan_in from the ParamInit stream of init_seed; biases zero.
ParamVector init_params(const MlpConfig& cfg);

LogitVector forward_logits(std::span<const double> theta, const MlpConfig& cfg,
                           std::span<const double> x);

BeliefVector softmax(std::span<const double> z);
/// z - logsumexp(z), computed without forming softmax first.
Vector log_softmax(std::span<const double> z);

/// Per-layer factors of ∇_θ z(x).
///
/// For layer l with input activation a_{l-1} and sensitivities B_l = ∂z/∂pre_l (V × out_l),
/// the Jacobian column of logit i is, within layer l,
///   ∂z_i/∂W_l[j,k] = B_l[i,j]·a_{l-1}[k],   ∂z_i/∂b_l[j] = B_l[i,j].
/// Kernels and projections can be evaluated from these factors without forming the
/// d×V Jacobian.
struct JacobianFactors {
  std::vector<LayerSlice> slices;
  std::vector<Vector> inputs;        // a_{l-1}, one per layer
  std::vector<Matrix> sensitivities; // B_l, one per layer
  std::size_t param_count = 0;
  std::size_t output_dim = 0;
};

/// Reverse accumulation, one pass per logit.
JacobianFactors jacobian_factors(std::span<const double> theta, const MlpConfig& cfg,
                                 std::span<const double> x);
/// Dense d×V Jacobian; column i is ∇_θ z_i(x).
Matrix dense_jacobian(const JacobianFactors& f);
Matrix jacobian_logits(std::span<const double> theta, const MlpConfig& cfg,
                       std::span<const double> x);
/// ‖∇_θ z(x)‖_F² from the factors.
double jacobian_squared_norm(const JacobianFactors& f);

/// softmax(z) - e_y.
Vector grad_loss_logits(std::span<const double> z, std::size_t label);
/// -log softmax(z)[label].
double loss_ce(std::span<const double> z, std::size_t label);

double loss_at(std::span<const double> theta, const MlpConfig& cfg, std::span<const double> x,
               std::size_t label);

/// ∇_θ of the cross-entropy loss via a single reverse pass seeded with grad_loss_logits.
ParamVector grad_loss_params(std::span<const double> theta, const MlpConfig& cfg,
                             std::span<const double> x, std::size_t label);

}  // namespace zkl
