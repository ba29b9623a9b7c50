#include <cmath>

#include "doctest.h"
#include "zkl/data.hpp"
#include "zkl/dynamics.hpp"
#include "zkl/error.hpp"
#include "zkl/kernel.hpp"
#include "zkl/optim.hpp"

using namespace zkl;

TEST_CASE("belief_update_matrix") {
  CHECK(belief_update_matrix(Vector{0.5, 0.5}) == Matrix{{0.5, -0.5}, {-0.5, 0.5}});
  CHECK(belief_update_matrix(Vector{1.0, 0.0}) == Matrix{{0, 0}, {-1, 1}});
  const Vector pi = softmax(Vector{0.3, -1.0, 2.0, 0.1});
  const Matrix A = belief_update_matrix(pi);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += A(i, j);
    CHECK(std::abs(s) <= 1e-12);
  }
  // ‖A‖₂ may exceed 1.
  CHECK(spectral_norm(belief_update_matrix(Vector{1.0, 0.0})) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("predict_dynamics") {
  const Matrix A = belief_update_matrix(Vector{0.5, 0.5});
  const Vector G{-0.5, 0.5};
  const Vector p = predict_dynamics({A, Matrix::identity(2), G, 0.1});
  CHECK(p[0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-0.05).epsilon(1e-15));
  for (double v : predict_dynamics({A, Matrix::identity(2), G, 0.0})) CHECK(v == 0.0);
  for (double v : predict_dynamics({A, Matrix::identity(2), Vector{0, 0}, 0.1})) CHECK(v == 0.0);
  CHECK_THROWS_AS(predict_dynamics({A, Matrix::identity(3), G, 0.1}), InvalidArgument);
}

TEST_CASE("actual_dynamics") {
  MlpConfig lin;
  lin.input_dim = 3;
  lin.hidden_dims = {};
  lin.output_dim = 3;
  const ParamVector theta{0.2, -0.1, 0.4, 1.0, 0.0, -0.5, -0.3, 0.7, 0.1, 0.0, 0.1, -0.1};
  const Vector xo{0.5, 1.0, -1.0}, xu{1.0, -2.0, 0.5};
  for (double v : actual_dynamics(theta, theta, lin, xo)) CHECK(v == 0.0);

  // One FO step on (x_u, y): z'(x_o) = z(x_o) - η(⟨x_u, x_o⟩ + 1)G.
  const std::size_t y = 2;
  const double eta = 0.3;
  const ParamVector next = fo_sgd_step(theta, grad_loss_params(theta, lin, xu, y), eta);
  const Vector G = grad_loss_logits(forward_logits(theta, lin, xu), y);
  Vector z = forward_logits(theta, lin, xo), z2 = z;
  const double g = dot(xu, xo) + 1.0;
  for (std::size_t i = 0; i < 3; ++i) z2[i] -= eta * g * G[i];
  auto lse = [](const Vector& v) {
    double s = 0.0;
    for (double x : v) s += std::exp(x);
    return std::log(s);
  };
  const Vector got = actual_dynamics(theta, next, lin, xo);
  for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx((z2[i] - lse(z2)) - (z[i] - lse(z))).epsilon(1e-12));
}

TEST_CASE("belief-weighted change is second order") {
  const MlpConfig cfg;
  const ParamVector theta = init_params(cfg);
  const Dataset data = synth_blobs(cfg.output_dim, cfg.input_dim, 2, 4.0, 0);
  const Vector& xo = data.inputs[0];
  const Vector grad = grad_loss_params(theta, cfg, data.inputs[3], data.labels[3]);
  const Vector pi = softmax(forward_logits(theta, cfg, xo));
  for (double eta : {1e-2, 5e-3, 2.5e-3}) {
    const Vector d = actual_dynamics(theta, fo_sgd_step(theta, grad, eta), cfg, xo);
    CHECK(std::abs(dot(pi, d)) <= 10 * eta * eta);
  }
}

TEST_CASE("dynamics_residual") {
  CHECK(dynamics_residual(Vector{1, 2}, Vector{1, 2}) == 0.0);
  CHECK(dynamics_residual(Vector{1, 2}, Vector{0.5, 3}) == 1.0);
  CHECK_THROWS_AS(dynamics_residual(Vector{1}, Vector{1, 2}), InvalidArgument);
}

namespace {

struct Setup {
  MlpConfig cfg;
  ParamVector theta;
  Vector xo, xu;
  std::size_t yu = 0;
};

Setup default_setup() {
  Setup s;
  s.theta = init_params(s.cfg);
  const Dataset data = synth_blobs(s.cfg.output_dim, s.cfg.input_dim, 2, 4.0, 1);
  s.xo = data.inputs[0];
  s.xu = data.inputs[5];
  s.yu = data.labels[5];
  return s;
}

double fo_residual(const Setup& s, double eta) {
  const KernelMatrix K = fo_entk(jacobian_factors(s.theta, s.cfg, s.xo), jacobian_factors(s.theta, s.cfg, s.xu));
  const Matrix A = belief_update_matrix(softmax(forward_logits(s.theta, s.cfg, s.xo)));
  const Vector G = grad_loss_logits(forward_logits(s.theta, s.cfg, s.xu), s.yu);
  const ParamVector next = fo_sgd_step(s.theta, grad_loss_params(s.theta, s.cfg, s.xu, s.yu), eta);
  return dynamics_residual(predict_dynamics({A, K.entries, G, eta}), actual_dynamics(s.theta, next, s.cfg, s.xo));
}

}  // namespace

TEST_CASE("FO prediction residual is second order in eta") {
  const Setup s = default_setup();
  const double r1 = fo_residual(s, 2e-3), r2 = fo_residual(s, 1e-3);
  CHECK(r1 / r2 >= 3.2);
  CHECK(r1 / r2 <= 4.8);
  CHECK(r1 / fo_residual(s, 4e-3) >= 0.15);
  CHECK(r1 / fo_residual(s, 4e-3) <= 0.35);
}
