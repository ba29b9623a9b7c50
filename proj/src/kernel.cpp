#include "zkl/kernel.hpp"

#include <algorithm>
#include <string>

#include "zkl/error.hpp"

namespace zkl {

namespace {

void require_same_params(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw InvalidArgument(std::string(op) + ": parameter dimension mismatch " + std::to_string(a) + " vs " +
                          std::to_string(b));
  }
}

KernelMeta zo_meta(const PerturbationMatrix& U) {
  KernelMeta meta;
  meta.P = U.count();
  meta.distribution = U.distribution;
  meta.seed = U.seed;
  meta.step = U.step;
  return meta;
}

}  // namespace

std::string_view to_string(KernelKind k) noexcept { return k == KernelKind::FO ? "FO" : "ZO"; }

PerturbationMatrix make_perturbation(std::uint64_t seed, std::uint64_t step, std::size_t d, std::size_t P,
                                     Distribution dist) {
  return PerturbationMatrix{build_projection(seed, step, d, P, dist), dist, seed, step};
}

KernelMatrix fo_entk(const Matrix& J_o, const Matrix& J_u) {
  require_same_params(J_o.rows(), J_u.rows(), "fo_entk");
  return KernelMatrix{transpose_matmul(J_o, J_u), KernelKind::FO, {}};
}

KernelMatrix fo_entk(const JacobianFactors& o, const JacobianFactors& u) {
  require_same_params(o.param_count, u.param_count, "fo_entk");
  if (o.slices.size() != u.slices.size()) throw InvalidArgument("fo_entk: layer count mismatch");
  Matrix K(o.output_dim, u.output_dim);
  for (std::size_t l = 0; l < o.slices.size(); ++l) {
    const double gram = dot(o.inputs[l], u.inputs[l]) + 1.0;
    K += matmul(o.sensitivities[l], u.sensitivities[l].transposed()) * gram;
  }
  return KernelMatrix{std::move(K), KernelKind::FO, {}};
}

Matrix projected_jacobian(const PerturbationMatrix& U, const Matrix& J) {
  require_same_params(U.dim(), J.rows(), "projected_jacobian");
  return transpose_matmul(U.entries, J);
}

Matrix projected_jacobian(const PerturbationMatrix& U, const JacobianFactors& f) {
  require_same_params(U.dim(), f.param_count, "projected_jacobian");
  const std::size_t P = U.count();
  Matrix out(P, f.output_dim);
  for (std::size_t l = 0; l < f.slices.size(); ++l) {
    const auto& s = f.slices[l];
    const auto& a = f.inputs[l];
    // proj(p, j) = Σ_k U[w(j,k), p]·a[k] + U[b(j), p]; streamed over rows of U.
    Matrix proj(s.out, P);
    for (std::size_t j = 0; j < s.out; ++j) {
      auto acc = proj.row(j);
      for (std::size_t k = 0; k < s.in; ++k) {
        const double ak = a[k];
        if (ak == 0.0) continue;
        auto urow = U.entries.row(s.weight_offset + j * s.in + k);
        for (std::size_t p = 0; p < P; ++p) acc[p] += urow[p] * ak;
      }
      auto brow = U.entries.row(s.bias_offset + j);
      for (std::size_t p = 0; p < P; ++p) acc[p] += brow[p];
    }
    // out += projᵀ B_lᵀ
    out += transpose_matmul(proj, f.sensitivities[l].transposed());
  }
  return out;
}

KernelMatrix zo_entk_from_projected(const Matrix& projected_o, const Matrix& projected_u,
                                    const PerturbationMatrix& U) {
  if (projected_o.rows() != U.count() || projected_u.rows() != U.count()) {
    throw InvalidArgument("zo_entk: projected Jacobians do not have P rows");
  }
  return KernelMatrix{transpose_matmul(projected_o, projected_u), KernelKind::ZO, zo_meta(U)};
}

KernelMatrix zo_entk(const Matrix& J_o, const Matrix& J_u, const PerturbationMatrix& U) {
  require_same_params(J_o.rows(), J_u.rows(), "zo_entk");
  return zo_entk_from_projected(projected_jacobian(U, J_o), projected_jacobian(U, J_u), U);
}

KernelMatrix zo_entk(const JacobianFactors& o, const JacobianFactors& u, const PerturbationMatrix& U) {
  require_same_params(o.param_count, u.param_count, "zo_entk");
  return zo_entk_from_projected(projected_jacobian(U, o), projected_jacobian(U, u), U);
}

Matrix kernel_discrepancy(const KernelMatrix& fo, const KernelMatrix& zo) {
  if (fo.entries.rows() != zo.entries.rows() || fo.entries.cols() != zo.entries.cols()) {
    throw InvalidArgument("kernel_discrepancy: kernel shapes differ");
  }
  return fo.entries - zo.entries;
}

double jacobian_scale(const Matrix& J_o, const Matrix& J_u) {
  const double o = frobenius_norm(J_o);
  const double u = frobenius_norm(J_u);
  return std::max(o * o, u * u);
}

double jacobian_scale(const JacobianFactors& o, const JacobianFactors& u) {
  return std::max(jacobian_squared_norm(o), jacobian_squared_norm(u));
}

}  // namespace zkl
