#include "zkl/optim.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "zkl/error.hpp"

namespace zkl {

void OptimConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be finite and >= 0");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("mu must be finite and > 0");
  if (P < 1) throw InvalidArgument("P must be >= 1");
  if (steps < 1) throw InvalidArgument("steps must be >= 1");
}

std::string_view to_string(Algorithm a) noexcept { return a == Algorithm::FO ? "FO" : "ZO"; }

double spsa_coefficient(const LossFn& loss, std::span<const double> theta, std::span<const double> u, double mu) {
  if (!(mu > 0.0)) throw InvalidArgument("spsa_coefficient: mu must be > 0");
  if (u.size() != theta.size()) throw InvalidArgument("spsa_coefficient: direction length mismatch");
  Vector shifted(theta.begin(), theta.end());
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += mu * u[i];
  const double plus = loss(shifted);
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] = theta[i] - mu * u[i];
  const double minus = loss(shifted);
  if (!std::isfinite(plus) || !std::isfinite(minus)) throw NumericError("spsa_coefficient: non-finite loss");
  return (plus - minus) / (2.0 * mu);
}

ZoStep zo_sgd_step(const LossFn& loss, std::span<const double> theta, const OptimConfig& cfg, std::uint64_t step) {
  cfg.validate();
  const std::size_t d = theta.size();
  ZoStep out;
  out.theta.assign(theta.begin(), theta.end());
  out.U = PerturbationMatrix{Matrix(d, cfg.P), cfg.distribution, cfg.master_seed, step};
  out.coefficients.resize(cfg.P);

  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(cfg.P));
  const double scale = cfg.eta / static_cast<double>(cfg.P);
  Vector u(d);
  for (std::size_t p = 0; p < cfg.P; ++p) {
    Stream(StreamKey{cfg.master_seed, step, p, Purpose::Perturbation}).fill(u, cfg.distribution);
    const double c = spsa_coefficient(loss, theta, u, cfg.mu);
    out.coefficients[p] = c;
    for (std::size_t k = 0; k < d; ++k) {
      out.theta[k] -= scale * c * u[k];
      out.U.entries(k, p) = u[k] * inv_sqrt_p;
    }
  }
  return out;
}

ParamVector fo_sgd_step(std::span<const double> theta, std::span<const double> grad, double eta) {
  if (theta.size() != grad.size()) throw InvalidArgument("fo_sgd_step: gradient length mismatch");
  ParamVector out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= eta * grad[i];
  return out;
}

std::vector<std::size_t> sample_order(std::size_t dataset_size, std::size_t steps, std::uint64_t seed) {
  if (dataset_size == 0) throw InvalidArgument("sample_order: empty dataset");
  std::vector<std::size_t> order;
  order.reserve(steps);
  std::vector<std::size_t> perm(dataset_size);
  for (std::uint64_t epoch = 0; order.size() < steps; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Stream s(StreamKey{seed, epoch, 0, Purpose::DataOrder});
    for (std::size_t i = dataset_size; i > 1; --i) std::swap(perm[i - 1], perm[s.below(i)]);
    for (std::size_t i = 0; i < dataset_size && order.size() < steps; ++i) order.push_back(perm[i]);
  }
  return order;
}

TrajectoryRecord run_trajectory(const MlpConfig& model, std::span<const double> theta0, const Dataset& data,
                                const OptimConfig& optim, Algorithm algorithm, const std::vector<Vector>& probes) {
  model.validate();
  optim.validate();
  data.validate(model.input_dim, model.output_dim);

  TrajectoryRecord rec;
  rec.algorithm = algorithm;
  rec.optim = optim;
  ParamVector theta(theta0.begin(), theta0.end());
  const auto order = sample_order(data.size(), optim.steps, optim.master_seed);

  for (std::size_t t = 0; t < optim.steps; ++t) {
    const auto& x = data.inputs[order[t]];
    const std::size_t y = data.labels[order[t]];
    TrajectoryStep st;
    st.step = t;
    st.loss = loss_at(theta, model, x, y);
    if (!std::isfinite(st.loss) || st.loss > kDivergenceLoss) {
      rec.diverged = true;
      break;
    }

    ParamVector next;
    if (algorithm == Algorithm::FO) {
      next = fo_sgd_step(theta, grad_loss_params(theta, model, x, y), optim.eta);
    } else {
      LossFn loss = [&](std::span<const double> th) { return loss_at(th, model, x, y); };
      try {
        next = zo_sgd_step(loss, theta, optim, t).theta;
      } catch (const NumericError&) {
        rec.diverged = true;
        break;
      }
    }

    double sq = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) sq += (next[i] - theta[i]) * (next[i] - theta[i]);
    st.update_norm = std::sqrt(sq);
    theta = std::move(next);

    bool finite = all_finite(theta);
    for (const auto& probe : probes) {
      Vector z = forward_logits(theta, model, probe);
      finite = finite && all_finite(z);
      st.probe_beliefs.push_back(softmax(z));
      st.probe_logits.push_back(std::move(z));
    }
    if (!finite) {
      rec.diverged = true;
      break;
    }
    rec.steps.push_back(std::move(st));
  }
  return rec;
}

}  // namespace zkl
