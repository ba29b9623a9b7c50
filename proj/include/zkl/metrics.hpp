#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "zkl/linalg.hpp"
#include "zkl/rng.hpp"

namespace zkl {

/// ‖K_fo − K_zo‖_F / ‖K_fo‖_F. Throws InvalidArgument when ‖K_fo‖_F == 0.
double rel_frobenius_error(const Matrix& fo, const Matrix& zo);

/// Unnormalised HSIC ⟨H K1 H, H K2 H⟩_F with H = I − 𝟙𝟙ᵀ/V.
/// Equals Tr(K1 H K2 H) for symmetric kernels; stays an inner product for cross-kernels.
double hsic(const Matrix& k1, const Matrix& k2);

/// 1 − HSIC(K1,K2)/√(HSIC(K1,K1)·HSIC(K2,K2)), in [0, 2].
/// Throws InvalidArgument when either kernel is (numerically) zero after centering.
double cka_error(const Matrix& k1, const Matrix& k2);

enum class SpectraKind { Eigen, Singular };
std::string_view to_string(SpectraKind k) noexcept;

struct SpectralDistance {
  double value = 0.0;
  SpectraKind kind = SpectraKind::Eigen;
};

/// Mean absolute difference of sorted spectra. Eigenvalues when both kernels are symmetric
/// within 1e-10 (relative to their Frobenius norms), singular values otherwise.
SpectralDistance spectral_distance(const Matrix& k1, const Matrix& k2);

struct MetricReport {
  std::string pair_id;
  std::size_t P = 0;
  Distribution distribution = Distribution::Gaussian;
  std::uint64_t seed = 0;
  double rel_frobenius = 0.0;
  double cka_error = 0.0;
  double spectral_distance = 0.0;
  SpectraKind spectra_kind = SpectraKind::Eigen;
  /// CKA on V < 3 has a single centered degree of freedom.
  bool small_v_warning = false;
};

MetricReport compare_kernels(const Matrix& fo, const Matrix& zo);

}  // namespace zkl
