#include "zkl/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zkl/error.hpp"
#include "zkl/rng.hpp"

namespace zkl {

namespace {

struct ForwardCache {
  std::vector<Vector> inputs;   // input to each layer
  std::vector<Vector> preacts;  // pre-activation of each layer; last one is z
};

double activate(Activation a, double v) { return a == Activation::Tanh ? std::tanh(v) : std::max(0.0, v); }

double activate_grad(Activation a, double pre) {
  if (a == Activation::Tanh) {
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  }
  return pre > 0.0 ? 1.0 : 0.0;
}

void check_theta(std::span<const double> theta, const MlpConfig& cfg) {
  if (theta.size() != cfg.param_count()) {
    throw InvalidArgument("parameter vector has length " + std::to_string(theta.size()) +
                          ", config implies " + std::to_string(cfg.param_count()));
  }
}

void check_input(std::span<const double> x, const MlpConfig& cfg) {
  if (x.size() != cfg.input_dim) {
    throw InvalidArgument("input has length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(cfg.input_dim));
  }
}

void check_label(std::size_t label, std::size_t V) {
  if (label >= V) {
    throw InvalidArgument("label " + std::to_string(label) + " out of range for " + std::to_string(V) +
                          " classes");
  }
}

ForwardCache forward(std::span<const double> theta, const MlpConfig& cfg, std::span<const double> x) {
  cfg.validate();
  check_theta(theta, cfg);
  check_input(x, cfg);
  const auto slices = layer_slices(cfg);
  ForwardCache cache;
  Vector a(x.begin(), x.end());
  for (std::size_t l = 0; l < slices.size(); ++l) {
    const auto& s = slices[l];
    Vector pre(s.out);
    for (std::size_t j = 0; j < s.out; ++j) {
      double acc = theta[s.bias_offset + j];
      const double* w = theta.data() + s.weight_offset + j * s.in;
      for (std::size_t k = 0; k < s.in; ++k) acc += w[k] * a[k];
      pre[j] = acc;
    }
    cache.inputs.push_back(std::move(a));
    if (l + 1 < slices.size()) {
      a.resize(s.out);
      for (std::size_t j = 0; j < s.out; ++j) a[j] = activate(cfg.activation, pre[j]);
    }
    cache.preacts.push_back(std::move(pre));
  }
  return cache;
}

/// Pulls `seed` (∂/∂z) back through the network, invoking visit(l, delta_l) for every layer
/// from last to first. delta_l is ∂/∂pre_l.
template <typename Visit>
void backward(std::span<const double> theta, const MlpConfig& cfg, const std::vector<LayerSlice>& slices,
              const ForwardCache& cache, Vector delta, Visit&& visit) {
  for (std::size_t l = slices.size(); l-- > 0;) {
    visit(l, delta);
    if (l == 0) break;
    const auto& s = slices[l];
    Vector prev(s.in, 0.0);
    for (std::size_t j = 0; j < s.out; ++j) {
      const double dj = delta[j];
      if (dj == 0.0) continue;
      const double* w = theta.data() + s.weight_offset + j * s.in;
      for (std::size_t k = 0; k < s.in; ++k) prev[k] += w[k] * dj;
    }
    const auto& pre = cache.preacts[l - 1];
    for (std::size_t k = 0; k < s.in; ++k) prev[k] *= activate_grad(cfg.activation, pre[k]);
    delta = std::move(prev);
  }
}

}  // namespace

std::string_view to_string(Activation a) noexcept { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

void MlpConfig::validate() const {
  if (input_dim < 1) throw InvalidArgument("input_dim must be >= 1");
  if (output_dim < 2) throw InvalidArgument("output_dim must be >= 2");
  for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
    if (hidden_dims[i] < 1) throw InvalidArgument("hidden_dims[" + std::to_string(i) + "] must be >= 1");
  }
  if (!std::isfinite(init_scale)) throw InvalidArgument("init_scale must be finite");
}

std::size_t MlpConfig::param_count() const {
  std::size_t d = 0;
  for (const auto& s : layer_slices(*this)) d += s.out * s.in + s.out;
  return d;
}

std::vector<LayerSlice> layer_slices(const MlpConfig& cfg) {
  std::vector<LayerSlice> slices;
  std::size_t in = cfg.input_dim;
  std::size_t offset = 0;
  auto push = [&](std::size_t out) {
    LayerSlice s{in, out, offset, offset + in * out};
    offset = s.bias_offset + out;
    slices.push_back(s);
    in = out;
  };
  for (std::size_t h : cfg.hidden_dims) push(h);
  push(cfg.output_dim);
  return slices;
}

std::vector<LayerParams> unflatten(std::span<const double> theta, const MlpConfig& cfg) {
  check_theta(theta, cfg);
  std::vector<LayerParams> layers;
  for (const auto& s : layer_slices(cfg)) {
    LayerParams p;
    p.weight = Matrix(s.out, s.in,
                      std::vector<double>(theta.begin() + s.weight_offset, theta.begin() + s.bias_offset));
    p.bias.assign(theta.begin() + s.bias_offset, theta.begin() + s.bias_offset + s.out);
    layers.push_back(std::move(p));
  }
  return layers;
}

ParamVector flatten(std::span<const LayerParams> layers) {
  ParamVector theta;
  for (const auto& l : layers) {
    if (l.bias.size() != l.weight.rows()) throw InvalidArgument("flatten: bias/weight row mismatch");
    theta.insert(theta.end(), l.weight.data().begin(), l.weight.data().end());
    theta.insert(theta.end(), l.bias.begin(), l.bias.end());
  }
  return theta;
}

ParamVector init_params(const MlpConfig& cfg) {
  cfg.validate();
  ParamVector theta(cfg.param_count(), 0.0);
  const auto slices = layer_slices(cfg);
  for (std::size_t l = 0; l < slices.size(); ++l) {
    const auto& s = slices[l];
    Stream stream(StreamKey{cfg.init_seed, l, 0, Purpose::ParamInit});
    const double scale = cfg.init_scale / std::sqrt(static_cast<double>(s.in));
    for (std::size_t i = 0; i < s.in * s.out; ++i) theta[s.weight_offset + i] = scale * stream.normal();
  }
  return theta;
}

LogitVector forward_logits(std::span<const double> theta, const MlpConfig& cfg,
                           std::span<const double> x) {
  return forward(theta, cfg, x).preacts.back();
}

BeliefVector softmax(std::span<const double> z) {
  if (z.empty()) return {};
  const double zmax = *std::max_element(z.begin(), z.end());
  BeliefVector p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

Vector log_softmax(std::span<const double> z) {
  if (z.empty()) return {};
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double lse = zmax + std::log(sum);
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

JacobianFactors jacobian_factors(std::span<const double> theta, const MlpConfig& cfg,
                                 std::span<const double> x) {
  const ForwardCache cache = forward(theta, cfg, x);
  JacobianFactors f;
  f.slices = layer_slices(cfg);
  f.inputs = cache.inputs;
  f.param_count = cfg.param_count();
  f.output_dim = cfg.output_dim;
  for (const auto& s : f.slices) f.sensitivities.emplace_back(cfg.output_dim, s.out);

  for (std::size_t i = 0; i < cfg.output_dim; ++i) {
    Vector seed(cfg.output_dim, 0.0);
    seed[i] = 1.0;
    backward(theta, cfg, f.slices, cache, std::move(seed), [&](std::size_t l, const Vector& delta) {
      std::copy(delta.begin(), delta.end(), f.sensitivities[l].row(i).begin());
    });
  }
  return f;
}

Matrix dense_jacobian(const JacobianFactors& f) {
  Matrix J(f.param_count, f.output_dim);
  for (std::size_t l = 0; l < f.slices.size(); ++l) {
    const auto& s = f.slices[l];
    const auto& a = f.inputs[l];
    const auto& B = f.sensitivities[l];
    for (std::size_t j = 0; j < s.out; ++j) {
      for (std::size_t k = 0; k < s.in; ++k) {
        auto row = J.row(s.weight_offset + j * s.in + k);
        for (std::size_t i = 0; i < f.output_dim; ++i) row[i] = B(i, j) * a[k];
      }
      auto brow = J.row(s.bias_offset + j);
      for (std::size_t i = 0; i < f.output_dim; ++i) brow[i] = B(i, j);
    }
  }
  return J;
}

Matrix jacobian_logits(std::span<const double> theta, const MlpConfig& cfg,
                       std::span<const double> x) {
  return dense_jacobian(jacobian_factors(theta, cfg, x));
}

double jacobian_squared_norm(const JacobianFactors& f) {
  double total = 0.0;
  for (std::size_t l = 0; l < f.slices.size(); ++l) {
    const double b = frobenius_norm(f.sensitivities[l]);
    total += b * b * (dot(f.inputs[l], f.inputs[l]) + 1.0);
  }
  return total;
}

Vector grad_loss_logits(std::span<const double> z, std::size_t label) {
  check_label(label, z.size());
  Vector g = softmax(z);
  g[label] -= 1.0;
  return g;
}

double loss_ce(std::span<const double> z, std::size_t label) {
  check_label(label, z.size());
  return -log_softmax(z)[label];
}

double loss_at(std::span<const double> theta, const MlpConfig& cfg, std::span<const double> x,
               std::size_t label) {
  return loss_ce(forward_logits(theta, cfg, x), label);
}

ParamVector grad_loss_params(std::span<const double> theta, const MlpConfig& cfg,
                             std::span<const double> x, std::size_t label) {
  check_label(label, cfg.output_dim);
  const ForwardCache cache = forward(theta, cfg, x);
  const auto slices = layer_slices(cfg);
  ParamVector grad(theta.size(), 0.0);
  backward(theta, cfg, slices, cache, grad_loss_logits(cache.preacts.back(), label),
           [&](std::size_t l, const Vector& delta) {
             const auto& s = slices[l];
             const auto& a = cache.inputs[l];
             for (std::size_t j = 0; j < s.out; ++j) {
               double* w = grad.data() + s.weight_offset + j * s.in;
               for (std::size_t k = 0; k < s.in; ++k) w[k] = delta[j] * a[k];
               grad[s.bias_offset + j] = delta[j];
             }
           });
  return grad;
}

}  // namespace zkl
