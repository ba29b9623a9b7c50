#include <cmath>
#include <set>

#include "doctest.h"
#include "zkl/error.hpp"
#include "zkl/rng.hpp"

using namespace zkl;

TEST_CASE("sample_perturbation is deterministic per key") {
  const StreamKey key{42, 3, 7, Purpose::Perturbation};
  CHECK(sample_perturbation(key, 100, Distribution::Gaussian) == sample_perturbation(key, 100, Distribution::Gaussian));
  CHECK(sample_perturbation(key, 100, Distribution::Gaussian) !=
        sample_perturbation(StreamKey{42, 3, 8, Purpose::Perturbation}, 100, Distribution::Gaussian));
  CHECK_THROWS_AS(sample_perturbation(key, 0, Distribution::Gaussian), InvalidArgument);
}

TEST_CASE("distinct key fields give distinct hashes") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t t = 0; t < 4; ++t)
      for (std::uint64_t p = 0; p < 4; ++p)
        for (std::uint32_t tag = 0; tag < 6; ++tag) seen.insert(hash_key({s, t, p, static_cast<Purpose>(tag)}));
  CHECK(seen.size() == 4u * 4 * 4 * 6);
}

TEST_CASE("rademacher support and norm") {
  for (std::uint64_t p = 0; p < 20; ++p) {
    const Vector u = sample_perturbation({1, 0, p, Purpose::Perturbation}, 5, Distribution::Rademacher);
    double sq = 0.0;
    for (double v : u) {
      CHECK((v == 1.0 || v == -1.0));
      sq += v * v;
    }
    CHECK(sq == 5.0);
  }
  const Vector long_u = sample_perturbation({1, 0, 0, Purpose::Perturbation}, 100000, Distribution::Rademacher);
  double mean = 0.0;
  for (double v : long_u) mean += v;
  CHECK(std::abs(mean / 1e5) < 0.02);
}

TEST_CASE("gaussian moments at d = 1e5") {
  const Vector u = sample_perturbation({7, 0, 0, Purpose::Perturbation}, 100000, Distribution::Gaussian);
  double mean = 0.0, sq = 0.0;
  for (double v : u) mean += v;
  mean /= 1e5;
  for (double v : u) sq += (v - mean) * (v - mean);
  const double var = sq / (1e5 - 1);
  CHECK(std::abs(mean) <= 0.02);
  CHECK(var >= 0.98);
  CHECK(var <= 1.02);
}

TEST_CASE("streams with different perturbation index are uncorrelated") {
  const std::size_t n = 100000;
  const Vector a = sample_perturbation({3, 1, 0, Purpose::Perturbation}, n, Distribution::Gaussian);
  const Vector b = sample_perturbation({3, 1, 1, Purpose::Perturbation}, n, Distribution::Gaussian);
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  CHECK(std::abs(ab / std::sqrt(aa * bb)) < 0.01);
}

TEST_CASE("build_projection") {
  const Matrix u1 = build_projection(5, 0, 6, 1, Distribution::Rademacher);
  CHECK(u1.cols() == 1);
  for (double v : u1.data()) CHECK((v == 1.0 || v == -1.0));

  const std::size_t d = 12, P = 3;
  const Matrix u = build_projection(5, 2, d, P, Distribution::Rademacher);
  for (std::size_t p = 0; p < P; ++p) {
    const Vector col = u.column(p);
    CHECK(norm2(col) == doctest::Approx(std::sqrt(double(d) / P)).epsilon(1e-15));
    const Vector raw = sample_perturbation({5, 2, p, Purpose::Perturbation}, d, Distribution::Rademacher);
    for (std::size_t i = 0; i < d; ++i) CHECK(col[i] == raw[i] / std::sqrt(double(P)));
  }
  CHECK_THROWS_AS(build_projection(5, 0, 4, 0, Distribution::Gaussian), InvalidArgument);
}

TEST_CASE("E[U Uᵀ] = I over many seeds") {
  const std::size_t d = 4, P = 2, seeds = 100000;
  Matrix acc(d, d);
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const Matrix u = build_projection(s, 0, d, P, Distribution::Gaussian);
    acc += matmul(u, u.transposed());
  }
  acc *= 1.0 / seeds;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(acc(i, j) - (i == j ? 1.0 : 0.0)) <= 0.02);
}

TEST_CASE("stream helpers") {
  Stream s({1, 2, 3, Purpose::MonteCarlo});
  for (int i = 0; i < 1000; ++i) {
    const double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(s.below(7) < 7u);
  }
  CHECK_THROWS_AS(s.below(0), InvalidArgument);
  CHECK(parse_distribution("gaussian") == Distribution::Gaussian);
  CHECK(parse_distribution("rademacher") == Distribution::Rademacher);
  CHECK_THROWS_AS(parse_distribution("uniform"), InvalidArgument);
  CHECK(to_string(Distribution::Rademacher) == "rademacher");
}
