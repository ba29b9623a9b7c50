#include "zkl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "zkl/error.hpp"

namespace zkl {

namespace {

void require_square_same(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw InvalidArgument(std::string(op) + ": kernels must be square and of equal size");
  }
}

Matrix double_center(const Matrix& k) {
  const std::size_t n = k.rows();
  Vector row_mean(n, 0.0), col_mean(n, 0.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row_mean[i] += k(i, j);
      col_mean[j] += k(i, j);
      mean += k(i, j);
    }
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    row_mean[i] *= inv;
    col_mean[i] *= inv;
  }
  mean *= inv * inv;
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = k(i, j) - row_mean[i] - col_mean[j] + mean;
  return c;
}

bool symmetric_kernel(const Matrix& k) { return is_symmetric(k, 1e-10 * std::max(1.0, frobenius_norm(k))); }

}  // namespace

double rel_frobenius_error(const Matrix& fo, const Matrix& zo) {
  if (fo.rows() != zo.rows() || fo.cols() != zo.cols()) {
    throw InvalidArgument("rel_frobenius_error: kernel shapes differ");
  }
  const double ref = frobenius_norm(fo);
  if (ref == 0.0) throw InvalidArgument("rel_frobenius_error: reference kernel has zero norm");
  return frobenius_norm(fo - zo) / ref;
}

double hsic(const Matrix& k1, const Matrix& k2) {
  require_square_same(k1, k2, "hsic");
  return dot(double_center(k1).data(), double_center(k2).data());
}

double cka_error(const Matrix& k1, const Matrix& k2) {
  require_square_same(k1, k2, "cka_error");
  if (k1.rows() < 2) throw InvalidArgument("cka_error: need V >= 2");
  const Matrix c1 = double_center(k1);
  const Matrix c2 = double_center(k2);
  const double n1 = frobenius_norm(c1);
  const double n2 = frobenius_norm(c2);
  constexpr double kDegenerate = 1e-12;
  if (n1 <= kDegenerate * frobenius_norm(k1) || n1 == 0.0) {
    throw InvalidArgument("cka_error: first kernel is zero after centering (constant or all-equal entries)");
  }
  if (n2 <= kDegenerate * frobenius_norm(k2) || n2 == 0.0) {
    throw InvalidArgument("cka_error: second kernel is zero after centering (constant or all-equal entries)");
  }
  const double cka = dot(c1.data(), c2.data()) / (n1 * n2);
  return std::clamp(1.0 - cka, 0.0, 2.0);
}

std::string_view to_string(SpectraKind k) noexcept { return k == SpectraKind::Eigen ? "eigen" : "singular"; }

SpectralDistance spectral_distance(const Matrix& k1, const Matrix& k2) {
  require_square_same(k1, k2, "spectral_distance");
  SpectralDistance out;
  Vector s1, s2;
  if (symmetric_kernel(k1) && symmetric_kernel(k2)) {
    out.kind = SpectraKind::Eigen;
    s1 = symmetric_eigenvalues(k1);
    s2 = symmetric_eigenvalues(k2);
  } else {
    out.kind = SpectraKind::Singular;
    s1 = singular_values(k1);
    s2 = singular_values(k2);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < s1.size(); ++i) sum += std::abs(s1[i] - s2[i]);
  out.value = s1.empty() ? 0.0 : sum / static_cast<double>(s1.size());
  return out;
}

MetricReport compare_kernels(const Matrix& fo, const Matrix& zo) {
  MetricReport r;
  r.rel_frobenius = rel_frobenius_error(fo, zo);
  r.cka_error = cka_error(fo, zo);
  const auto sd = spectral_distance(fo, zo);
  r.spectral_distance = sd.value;
  r.spectra_kind = sd.kind;
  r.small_v_warning = fo.rows() < 3;
  return r;
}

}  // namespace zkl
