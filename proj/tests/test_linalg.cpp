#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "zkl/error.hpp"
#include "zkl/linalg.hpp"
#include "zkl/rng.hpp"

using namespace zkl;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Stream s(StreamKey{seed, 0, 0, Purpose::Points});
  Matrix m(r, c);
  s.fill(m.data(), Distribution::Gaussian);
  return m;
}

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  Matrix b = random_matrix(n, n, seed);
  return (b + b.transposed()) * 0.5;
}

// Power iteration on MᵀM; independent of the Jacobi code.
double power_iteration_norm(const Matrix& m) {
  Vector x(m.cols(), 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.1 * static_cast<double>(i);
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Vector y = matvec(m.transposed(), matvec(m, x));
    const double n = norm2(y);
    if (n == 0.0) return 0.0;
    for (auto& v : y) v /= n;
    const double next = std::sqrt(n / norm2(x));
    x = y;
    if (std::abs(next - lambda) < 1e-15 * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

}  // namespace

TEST_CASE("matmul") {
  const Matrix m{{1, 2}, {3, 4}};
  CHECK(matmul(Matrix::identity(2), m) == m);
  CHECK(matmul(m, Matrix{{0}, {1}}) == Matrix{{2}, {4}});
  CHECK(matmul(Matrix(2, 2), m) == Matrix(2, 2));
  CHECK_THROWS_AS(matmul(m, Matrix(3, 1)), InvalidArgument);
}

TEST_CASE("transpose_matmul matches explicit transpose") {
  const Matrix a = random_matrix(7, 3, 1);
  const Matrix b = random_matrix(7, 4, 2);
  const Matrix want = matmul(a.transposed(), b);
  const Matrix got = transpose_matmul(a, b);
  CHECK(frobenius_norm(got - want) < 1e-12);
  CHECK_THROWS_AS(transpose_matmul(a, Matrix(6, 2)), InvalidArgument);
}

TEST_CASE("matrix construction checks size") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), InvalidArgument);
}

TEST_CASE("frobenius_norm") {
  CHECK(frobenius_norm(Matrix(3, 3)) == 0.0);
  CHECK(frobenius_norm(Matrix::identity(2)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(frobenius_norm(Matrix{{3, 4}}) == 5.0);
}

TEST_CASE("spectral_norm") {
  CHECK(spectral_norm(Matrix::identity(3)) == doctest::Approx(1.0).epsilon(1e-14));
  const double d[] = {2.0, -5.0};
  CHECK(spectral_norm(Matrix::diagonal(d)) == doctest::Approx(5.0).epsilon(1e-14));
  // MᵀM = [[1,-1],[-1,1]] has eigenvalues {0, 2}.
  CHECK(spectral_norm(Matrix{{0, 0}, {-1, 1}}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  // MᵀM = [[1,1],[1,2]] has largest eigenvalue (3+√5)/2.
  CHECK(spectral_norm(Matrix{{1, 1}, {0, 1}}) == doctest::Approx(std::sqrt((3.0 + std::sqrt(5.0)) / 2.0)).epsilon(1e-12));
}

TEST_CASE("spectral_norm against closed-form 2x2 oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix m = random_matrix(2, 2, 300 + seed);
    const Matrix g = matmul(m.transposed(), m);
    const double tr = g(0, 0) + g(1, 1);
    const double det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    const double top = std::sqrt(0.5 * (tr + std::sqrt(tr * tr - 4 * det)));
    CHECK(spectral_norm(m) == doctest::Approx(top).epsilon(1e-12));
  }
}

TEST_CASE("spectral_norm agrees with power iteration") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Matrix m = random_matrix(4 + seed, 3 + (seed % 3), 10 + seed);
    const double want = power_iteration_norm(m);
    CHECK(std::abs(spectral_norm(m) - want) <= 1e-8 * want);
  }
}

TEST_CASE("singular_values") {
  const double d[] = {1.0, 3.0};
  CHECK(singular_values(Matrix::diagonal(d)) == Vector{1.0, 3.0});
  CHECK(singular_values(Matrix(2, 2)) == Vector{0.0, 0.0});
  const Vector s = singular_values(Matrix{{0, 1}, {0, 0}});
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(0.0));
  CHECK(s[1] == doctest::Approx(1.0));
  CHECK(singular_values(random_matrix(5, 3, 4)).size() == 3);
  CHECK(singular_values(random_matrix(3, 5, 4)).size() == 3);
}

TEST_CASE("symmetric_eigenvalues") {
  const double d[] = {2.0, 2.0};
  CHECK(symmetric_eigenvalues(Matrix::diagonal(d)) == Vector{2.0, 2.0});
  const Vector e = symmetric_eigenvalues(Matrix{{0, 1}, {1, 0}});
  CHECK(e[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(e[1] == doctest::Approx(1.0).epsilon(1e-14));
  for (double v : symmetric_eigenvalues(Matrix::identity(6))) CHECK(v == doctest::Approx(1.0));
  CHECK_THROWS_AS(symmetric_eigenvalues(Matrix{{0, 1}, {0, 0}}), InvalidArgument);
  CHECK_THROWS_AS(symmetric_eigenvalues(Matrix(2, 3)), InvalidArgument);
}

TEST_CASE("spectral invariants on random matrices") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Matrix m = random_matrix(6, 4 + seed, 100 + seed);
    const Vector s = singular_values(m);
    CHECK(std::is_sorted(s.begin(), s.end()));
    double sq = 0.0;
    for (double v : s) {
      CHECK(v >= 0.0);
      sq += v * v;
    }
    const double f2 = frobenius_norm(m) * frobenius_norm(m);
    CHECK(std::abs(sq - f2) <= 1e-8 * f2);
    CHECK(std::abs(spectral_norm(m) - s.back()) <= 1e-10 * s.back());

    const Matrix sym = random_symmetric(5 + seed, 200 + seed);
    const Vector ev = symmetric_eigenvalues(sym);
    CHECK(std::is_sorted(ev.begin(), ev.end()));
    double sum = 0.0;
    for (double v : ev) sum += v;
    CHECK(std::abs(sum - trace(sym)) <= 1e-8 * frobenius_norm(sym));
    Vector abs_ev;
    for (double v : ev) abs_ev.push_back(std::abs(v));
    std::sort(abs_ev.begin(), abs_ev.end());
    const Vector sv = singular_values(sym);
    for (std::size_t i = 0; i < sv.size(); ++i) CHECK(std::abs(sv[i] - abs_ev[i]) <= 1e-8);
  }
}

TEST_CASE("eigenvalues of a larger symmetric matrix") {
  // Q diag(λ) Qᵀ with Q from Householder reflection keeps the spectrum known.
  const std::size_t n = 40;
  Stream s(StreamKey{9, 0, 0, Purpose::Points});
  Vector v(n);
  s.fill(v, Distribution::Gaussian);
  const double vn = norm2(v);
  for (auto& x : v) x /= vn;
  const Matrix q = Matrix::identity(n) - outer(v, v) * 2.0;
  Vector lambda(n);
  for (std::size_t i = 0; i < n; ++i) lambda[i] = static_cast<double>(i) - 10.5;
  const Matrix m = matmul(matmul(q, Matrix::diagonal(lambda)), q.transposed());
  const Matrix sym = (m + m.transposed()) * 0.5;
  const Vector ev = symmetric_eigenvalues(sym);
  for (std::size_t i = 0; i < n; ++i) CHECK(ev[i] == doctest::Approx(lambda[i]).epsilon(1e-10));
}

TEST_CASE("vector helpers") {
  const Vector a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
  CHECK(norm2(Vector{3, 4}) == 5.0);
  CHECK(trace(Matrix{{1, 2}, {3, 4}}) == 5.0);
  CHECK(outer(Vector{1, 2}, Vector{3}) == Matrix{{3}, {6}});
  CHECK(all_finite(a));
  CHECK_FALSE(all_finite(Vector{1.0, std::nan("")}));
  CHECK(is_symmetric(Matrix{{1, 2}, {2, 1}}, 0.0));
  CHECK_FALSE(is_symmetric(Matrix{{1, 2}, {2.1, 1}}, 1e-3));
  CHECK(matvec(Matrix{{1, 2}, {3, 4}}, Vector{1, 1}) == Vector{3, 7});
}
