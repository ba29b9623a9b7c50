#include <cmath>

#include "doctest.h"
#include "zkl/error.hpp"
#include "zkl/model.hpp"
#include "zkl/rng.hpp"

using namespace zkl;

namespace {

Vector random_vector(std::size_t n, std::uint64_t seed) {
  Vector v(n);
  Stream(StreamKey{seed, 0, 0, Purpose::Points}).fill(v, Distribution::Gaussian);
  return v;
}

Matrix finite_difference_jacobian(std::span<const double> theta, const MlpConfig& cfg, std::span<const double> x,
                                  double h) {
  Matrix fd(theta.size(), cfg.output_dim);
  Vector t(theta.begin(), theta.end());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double keep = t[k];
    t[k] = keep + h;
    const Vector zp = forward_logits(t, cfg, x);
    t[k] = keep - h;
    const Vector zm = forward_logits(t, cfg, x);
    t[k] = keep;
    for (std::size_t i = 0; i < cfg.output_dim; ++i) fd(k, i) = (zp[i] - zm[i]) / (2 * h);
  }
  return fd;
}

MlpConfig small_cfg() {
  MlpConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden_dims = {6, 4};
  cfg.output_dim = 3;
  return cfg;
}

}  // namespace

TEST_CASE("parameter counting and init") {
  MlpConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dims = {3};
  cfg.output_dim = 2;
  CHECK(cfg.param_count() == 23);
  CHECK(init_params(cfg).size() == 23);
  CHECK(init_params(cfg) == init_params(cfg));
  MlpConfig other = cfg;
  other.init_seed = 1;
  CHECK(init_params(cfg) != init_params(other));
  cfg.init_scale = 0.0;
  for (double v : init_params(cfg)) CHECK(v == 0.0);

  const ParamVector theta = init_params(MlpConfig{});
  const auto layers = unflatten(theta, MlpConfig{});
  for (double b : layers[0].bias) CHECK(b == 0.0);
}

TEST_CASE("config validation") {
  MlpConfig cfg;
  cfg.output_dim = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.output_dim = 3;
  cfg.hidden_dims = {4, 0};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK(parse_activation("relu") == Activation::Relu);
  CHECK_THROWS_AS(parse_activation("gelu"), InvalidArgument);
}

TEST_CASE("forward_logits") {
  MlpConfig cfg = small_cfg();
  cfg.init_scale = 0.0;
  const Vector z = forward_logits(init_params(cfg), cfg, random_vector(5, 1));
  for (double v : z) CHECK(v == 0.0);
  CHECK_THROWS_AS(forward_logits(init_params(cfg), cfg, Vector(4)), InvalidArgument);
  CHECK_THROWS_AS(forward_logits(Vector(3), cfg, Vector(5)), InvalidArgument);

  MlpConfig lin;
  lin.input_dim = 2;
  lin.hidden_dims = {};
  lin.output_dim = 2;
  const ParamVector identity{1, 0, 0, 1, 0, 0};
  CHECK(forward_logits(identity, lin, Vector{1, 0}) == Vector{1, 0});
}

TEST_CASE("2-2-2 tanh net, hand-set weights") {
  MlpConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_dims = {2};
  cfg.output_dim = 2;
  // W1 = [[0.5,-1],[2,0.25]], b1 = [0.1,-0.2], W2 = [[1,-1],[0.5,2]], b2 = [0,0.3]
  const ParamVector theta{0.5, -1, 2, 0.25, 0.1, -0.2, 1, -1, 0.5, 2, 0, 0.3};
  const Vector x{1.0, 2.0};
  // pre1 = (0.5 - 2 + 0.1, 2 + 0.5 - 0.2) = (-1.4, 2.3)
  const double h0 = std::tanh(-1.4), h1 = std::tanh(2.3);
  const Vector z = forward_logits(theta, cfg, x);
  CHECK(z[0] == doctest::Approx(h0 - h1).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(0.5 * h0 + 2 * h1 + 0.3).epsilon(1e-15));
  // Golden values.
  CHECK(z[0] == doctest::Approx(-1.865448044468).epsilon(1e-9));
  CHECK(z[1] == doctest::Approx(1.817516968431).epsilon(1e-9));
}

TEST_CASE("softmax and log_softmax") {
  for (double v : softmax(Vector(4, 0.0))) CHECK(v == 0.25);
  const Vector p = softmax(Vector{std::log(3.0), 0.0});
  CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-15));
  const Vector z = random_vector(7, 3);
  Vector shifted = z;
  for (auto& v : shifted) v += 123.0;
  const Vector a = softmax(z), b = softmax(shifted);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) < 1e-15);
    sum += a[i];
  }
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  const Vector ls = log_softmax(Vector{1000.0, 0.0});
  CHECK(ls[0] == doctest::Approx(0.0));
  CHECK(ls[1] == doctest::Approx(-1000.0));
}

TEST_CASE("loss and logit gradient") {
  CHECK(loss_ce(Vector(5, 0.0), 2) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(loss_ce(Vector{std::log(3.0), 0.0}, 0) == doctest::Approx(0.28768207245178).epsilon(1e-12));
  CHECK(loss_ce(Vector{50.0, 0.0, 0.0}, 0) < 1e-20);
  CHECK(loss_ce(Vector{0.0, 0.0}, 0) >= 0.0);
  CHECK_THROWS_AS(loss_ce(Vector{0.0, 0.0}, 2), InvalidArgument);

  const Vector g = grad_loss_logits(Vector{0.0, 0.0}, 0);
  CHECK(g[0] == -0.5);
  CHECK(g[1] == 0.5);
  const Vector g2 = grad_loss_logits(random_vector(6, 4), 3);
  double s = 0.0;
  for (double v : g2) s += v;
  CHECK(std::abs(s) < 1e-15);
  // exp(-800) underflows: π = e_y exactly.
  for (double v : grad_loss_logits(Vector{800.0, 0.0, 0.0}, 0)) CHECK(v == 0.0);
  CHECK_THROWS_AS(grad_loss_logits(Vector{0.0, 0.0}, 5), InvalidArgument);
}

TEST_CASE("linear model Jacobian is block structured") {
  MlpConfig lin;
  lin.input_dim = 3;
  lin.hidden_dims = {};
  lin.output_dim = 4;
  const ParamVector theta = random_vector(lin.param_count(), 5);
  const Vector x{0.3, -1.2, 2.0};
  const Matrix J = jacobian_logits(theta, lin, x);
  REQUIRE(J.rows() == lin.param_count());
  REQUIRE(J.cols() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t k = 0; k < 3; ++k) CHECK(J(r * 3 + k, i) == (r == i ? x[k] : 0.0));
      CHECK(J(12 + r, i) == (r == i ? 1.0 : 0.0));
    }
  }
  // Zero input: only bias blocks survive.
  const Matrix J0 = jacobian_logits(theta, lin, Vector(3, 0.0));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t r = 0; r < lin.param_count(); ++r) CHECK(J0(r, i) == (r == 12 + i ? 1.0 : 0.0));
}

TEST_CASE("Jacobian matches central finite differences") {
  for (auto act : {Activation::Tanh, Activation::Relu}) {
    MlpConfig cfg = small_cfg();
    cfg.activation = act;
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      cfg.init_seed = trial;
      const ParamVector theta = init_params(cfg);
      const Vector x = random_vector(cfg.input_dim, 50 + trial);
      const Matrix J = jacobian_logits(theta, cfg, x);
      const Matrix fd = finite_difference_jacobian(theta, cfg, x, 1e-5);
      CHECK(frobenius_norm(J - fd) <= 1e-5 * frobenius_norm(J));
    }
  }
}

TEST_CASE("factored and dense Jacobian agree") {
  MlpConfig cfg = small_cfg();
  const ParamVector theta = init_params(cfg);
  const Vector x = random_vector(cfg.input_dim, 8);
  const JacobianFactors f = jacobian_factors(theta, cfg, x);
  const Matrix J = dense_jacobian(f);
  CHECK(J == jacobian_logits(theta, cfg, x));
  const double fn = frobenius_norm(J);
  CHECK(jacobian_squared_norm(f) == doctest::Approx(fn * fn).epsilon(1e-12));
}

TEST_CASE("grad_loss_params") {
  MlpConfig cfg = small_cfg();
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    cfg.init_seed = 100 + trial;
    const ParamVector theta = init_params(cfg);
    const Vector x = random_vector(cfg.input_dim, 200 + trial);
    const std::size_t y = trial % cfg.output_dim;
    const ParamVector g = grad_loss_params(theta, cfg, x, y);
    const Vector chain = matvec(jacobian_logits(theta, cfg, x), grad_loss_logits(forward_logits(theta, cfg, x), y));
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(std::abs(g[k] - chain[k]) <= 1e-10);

    Vector t = theta, fd(theta.size());
    const double h = 1e-5;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double keep = t[k];
      t[k] = keep + h;
      const double lp = loss_at(t, cfg, x, y);
      t[k] = keep - h;
      const double lm = loss_at(t, cfg, x, y);
      t[k] = keep;
      fd[k] = (lp - lm) / (2 * h);
    }
    Vector diff(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) diff[k] = g[k] - fd[k];
    CHECK(norm2(diff) <= 1e-5 * norm2(g));
  }
}

TEST_CASE("linear softmax regression gradient is (π - e_y) ⊗ x") {
  MlpConfig lin;
  lin.input_dim = 3;
  lin.hidden_dims = {};
  lin.output_dim = 3;
  const ParamVector theta{0.2, -0.1, 0.4, 1.0, 0.0, -0.5, -0.3, 0.7, 0.1, 0.0, 0.1, -0.1};
  const Vector x{1.0, -2.0, 0.5};
  const std::size_t y = 1;
  Vector z(3);
  for (std::size_t r = 0; r < 3; ++r) {
    z[r] = theta[9 + r];
    for (std::size_t k = 0; k < 3; ++k) z[r] += theta[r * 3 + k] * x[k];
  }
  Vector pi(3);
  double zs = 0.0;
  for (std::size_t r = 0; r < 3; ++r) zs += std::exp(z[r]);
  for (std::size_t r = 0; r < 3; ++r) pi[r] = std::exp(z[r]) / zs - (r == y ? 1.0 : 0.0);
  const ParamVector g = grad_loss_params(theta, lin, x, y);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(g[r * 3 + k] == doctest::Approx(pi[r] * x[k]).epsilon(1e-13));
    CHECK(g[9 + r] == doctest::Approx(pi[r]).epsilon(1e-13));
  }
}

TEST_CASE("perfect prediction gives zero parameter gradient") {
  MlpConfig lin;
  lin.input_dim = 2;
  lin.hidden_dims = {};
  lin.output_dim = 2;
  const ParamVector theta{0, 0, 0, 0, 800, 0};
  for (double v : grad_loss_params(theta, lin, Vector{1.0, 1.0}, 0)) CHECK(v == 0.0);
}

TEST_CASE("flatten round trip") {
  MlpConfig cfg = small_cfg();
  const ParamVector theta = init_params(cfg);
  const auto layers = unflatten(theta, cfg);
  REQUIRE(layers.size() == 3);
  CHECK(layers[0].weight.rows() == 6);
  CHECK(layers[0].weight.cols() == 5);
  CHECK(flatten(layers) == theta);
  CHECK(theta[layer_slices(cfg)[1].weight_offset] == layers[1].weight(0, 0));
}
