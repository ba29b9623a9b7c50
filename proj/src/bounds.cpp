#include "zkl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zkl/error.hpp"

namespace zkl {

namespace {

void require_symmetric_small(const Matrix& W, const char* op) {
  if (W.rows() != W.cols() || W.rows() == 0) throw InvalidArgument(std::string(op) + ": W must be square");
  if (W.rows() > 64) throw InvalidArgument(std::string(op) + ": d must be <= 64");
  if (!is_symmetric(W, 1e-12 * std::max(1.0, frobenius_norm(W)))) {
    throw InvalidArgument(std::string(op) + ": W must be symmetric");
  }
}

// u uᵀ W u uᵀ = (uᵀWu)·u uᵀ; accumulates into `acc`.
void add_quartic(Matrix& acc, const Matrix& W, std::span<const double> u, double weight) {
  const double q = dot(u, matvec(W, u)) * weight;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < u.size(); ++j) acc(i, j) += q * u[i] * u[j];
}

}  // namespace

std::size_t jl_required_p(std::size_t n, double epsilon, double delta, double c) {
  if (n < 1) throw InvalidArgument("jl_required_p: n must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("jl_required_p: epsilon must be in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("jl_required_p: delta must be in (0,1)");
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("jl_required_p: c must be > 0");
  const double bound = (2.0 * std::log(static_cast<double>(n)) + std::log(1.0 / delta)) / (c * epsilon * epsilon);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(bound)));
}

JlBudget jl_budget(std::size_t n, double epsilon, double delta, double c) {
  return JlBudget{n, epsilon, delta, c, jl_required_p(n, epsilon, delta, c)};
}

double jl_epsilon(std::size_t n, std::size_t P, double c, double delta) {
  if (P < 1) throw InvalidArgument("jl_epsilon: P must be >= 1");
  if (n < 1 || !(c > 0.0) || !(delta > 0.0 && delta < 1.0)) throw InvalidArgument("jl_epsilon: bad arguments");
  return std::sqrt((2.0 * std::log(static_cast<double>(n)) + std::log(1.0 / delta)) / (c * static_cast<double>(P)));
}

PreservationReport check_inner_product_preservation(const std::vector<Vector>& points, const Matrix& U,
                                                    double epsilon) {
  if (points.empty()) throw InvalidArgument("check_inner_product_preservation: no points");
  std::vector<Vector> projected;
  Vector sq_norms;
  for (const auto& w : points) {
    if (w.size() != U.rows()) throw InvalidArgument("check_inner_product_preservation: dimension mismatch");
    Vector pw(U.cols(), 0.0);
    for (std::size_t k = 0; k < U.rows(); ++k) {
      if (w[k] == 0.0) continue;
      auto urow = U.row(k);
      for (std::size_t p = 0; p < U.cols(); ++p) pw[p] += urow[p] * w[k];
    }
    projected.push_back(std::move(pw));
    sq_norms.push_back(dot(w, w));
  }

  PreservationReport report;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i; j < points.size(); ++j) {
      PairDistortion pd;
      pd.i = i;
      pd.j = j;
      pd.distortion = std::abs(dot(projected[i], projected[j]) - dot(points[i], points[j]));
      const double half = 0.5 * (sq_norms[i] + sq_norms[j]);
      pd.allowed = epsilon * half;
      pd.within = pd.distortion <= pd.allowed;
      if (!pd.within) ++report.violations;
      if (half > 0.0) report.epsilon_star = std::max(report.epsilon_star, pd.distortion / half);
      report.pairs.push_back(pd);
    }
  }
  return report;
}

double polarization_inner_product(const Matrix& U, std::span<const double> a, std::span<const double> b) {
  if (a.size() != U.rows() || b.size() != U.rows()) throw InvalidArgument("polarization_inner_product: bad length");
  Vector sum(a.size()), diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum[i] = a[i] + b[i];
    diff[i] = a[i] - b[i];
  }
  const Vector ps = matvec(U.transposed(), sum);
  const Vector pd = matvec(U.transposed(), diff);
  return 0.25 * (dot(ps, ps) - dot(pd, pd));
}

double epsilon_star(const Matrix& gram, const Matrix& projected_gram) {
  if (gram.rows() != gram.cols() || gram.rows() != projected_gram.rows() ||
      projected_gram.rows() != projected_gram.cols()) {
    throw InvalidArgument("epsilon_star: Gram matrices must be square and equal size");
  }
  double eps = 0.0;
  for (std::size_t i = 0; i < gram.rows(); ++i) {
    for (std::size_t j = i; j < gram.cols(); ++j) {
      const double half = 0.5 * (gram(i, i) + gram(j, j));
      if (half <= 0.0) continue;
      eps = std::max(eps, std::abs(projected_gram(i, j) - gram(i, j)) / half);
    }
  }
  return eps;
}

Matrix gaussian_fourth_moment_target(const Matrix& W) {
  return Matrix::identity(W.rows()) * trace(W) + W * 2.0;
}

Matrix gaussian_fourth_moment_oracle(const Matrix& W, std::size_t samples, std::uint64_t seed) {
  require_symmetric_small(W, "gaussian_fourth_moment_oracle");
  if (samples == 0) throw InvalidArgument("gaussian_fourth_moment_oracle: samples must be >= 1");
  const std::size_t d = W.rows();
  Matrix acc(d, d);
  Stream s(StreamKey{seed, 0, 0, Purpose::MonteCarlo});
  Vector u(d);
  const double w = 1.0 / static_cast<double>(samples);
  for (std::size_t t = 0; t < samples; ++t) {
    s.fill(u, Distribution::Gaussian);
    add_quartic(acc, W, u, w);
  }
  return acc;
}

Matrix multi_perturbation_target(const Matrix& W, std::size_t P) {
  if (P < 1) throw InvalidArgument("multi_perturbation_target: P must be >= 1");
  const double inv = 1.0 / static_cast<double>(P);
  return W * (1.0 + inv) + Matrix::identity(W.rows()) * (trace(W) * inv);
}

Matrix multi_perturbation_expectation_oracle(const Matrix& W, std::size_t P, std::size_t samples,
                                             std::uint64_t seed) {
  require_symmetric_small(W, "multi_perturbation_expectation_oracle");
  if (P < 1 || samples == 0) throw InvalidArgument("multi_perturbation_expectation_oracle: P, samples must be >= 1");
  const std::size_t d = W.rows();
  Matrix acc(d, d);
  Stream s(StreamKey{seed, P, 0, Purpose::MonteCarlo});
  Vector u(d);
  Matrix ubar(d, d);
  const double inv_p = 1.0 / static_cast<double>(P);
  for (std::size_t t = 0; t < samples; ++t) {
    std::fill(ubar.data().begin(), ubar.data().end(), 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      s.fill(u, Distribution::Gaussian);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) ubar(i, j) += inv_p * u[i] * u[j];
    }
    acc += matmul(matmul(ubar, W), ubar);
  }
  return acc * (1.0 / static_cast<double>(samples));
}

double rademacher_second_moment_exact(std::span<const double> g) {
  const std::size_t d = g.size();
  if (d > kMaxEnumerationDim) {
    throw InvalidArgument("rademacher_second_moment_exact: d = " + std::to_string(d) +
                          " exceeds enumeration limit 12; use second_moment_sampled");
  }
  if (d == 0) return 0.0;
  const std::uint64_t count = 1ULL << d;
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    double proj = 0.0;
    for (std::size_t i = 0; i < d; ++i) proj += ((mask >> i) & 1ULL) ? g[i] : -g[i];
    total += proj * proj * static_cast<double>(d);  // ‖u‖² = d for every sign vector
  }
  return total / static_cast<double>(count);
}

double second_moment_sampled(std::span<const double> g, Distribution dist, std::size_t samples,
                             std::uint64_t seed) {
  if (samples == 0) throw InvalidArgument("second_moment_sampled: samples must be >= 1");
  Stream s(StreamKey{seed, 0, 0, Purpose::MonteCarlo});
  Vector u(g.size());
  double total = 0.0;
  for (std::size_t t = 0; t < samples; ++t) {
    s.fill(u, dist);
    const double proj = dot(g, u);
    total += proj * proj * dot(u, u);
  }
  return total / static_cast<double>(samples);
}

double projection_tail_frequency(std::size_t d, std::size_t P, double epsilon, Distribution dist,
                                 std::size_t trials, std::uint64_t seed) {
  if (d == 0 || P == 0 || trials == 0) throw InvalidArgument("projection_tail_frequency: bad arguments");
  // Unit vector (1,1,...,1)/√d.
  const double xk = 1.0 / std::sqrt(static_cast<double>(d));
  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(P));
  Vector u(d);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    double sq = 0.0;
    Stream s(StreamKey{seed, t, 0, Purpose::MonteCarlo});
    for (std::size_t p = 0; p < P; ++p) {
      s.fill(u, dist);
      double proj = 0.0;
      for (double v : u) proj += v;
      proj *= xk * inv_sqrt_p;
      sq += proj * proj;
    }
    if (std::abs(sq - 1.0) >= epsilon) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

double gaussian_tail_bound(std::size_t P, double epsilon, double c) {
  return 2.0 * std::exp(-c * static_cast<double>(P) * epsilon * epsilon);
}

double rademacher_tail_bound(std::size_t P, double epsilon) {
  const double p = static_cast<double>(P);
  return 2.0 * std::exp(-p * epsilon * epsilon / 4.0 + p * epsilon * epsilon * epsilon / 6.0);
}

double delta_k_bound(double epsilon_star, double xi, std::size_t V) {
  if (epsilon_star < 0.0 || xi < 0.0) throw InvalidArgument("delta_k_bound: arguments must be non-negative");
  return epsilon_star * xi * std::sqrt(static_cast<double>(V));
}

DynamicsDiffBound dynamics_diff_bound(std::size_t V, std::size_t P, double eta, double xi, double norm_g,
                                      double norm_a, double c, double delta) {
  if (V < 2) throw InvalidArgument("dynamics_diff_bound: V must be >= 2 (ln V > 0)");
  if (P < 1 || !(eta > 0.0) || !(xi > 0.0) || !(norm_g > 0.0) || !(norm_a > 0.0) || !(c > 0.0) ||
      !(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("dynamics_diff_bound: arguments must be positive (delta in (0,1))");
  }
  const double v = static_cast<double>(V);
  const double log_v = std::log(v);
  const double dynamics = eta * xi * norm_g * norm_a;
  DynamicsDiffBound b;
  b.simplified = std::sqrt(v * log_v / static_cast<double>(P)) * dynamics;
  b.constant = std::sqrt((2.0 + std::log(1.0 / delta) / log_v) / c);
  b.explicit_form = jl_epsilon(V, P, c, delta) * std::sqrt(v) * dynamics;
  return b;
}

}  // namespace zkl
