#include "zkl/rng.hpp"

#include <cmath>
#include <string>

#include "zkl/error.hpp"

namespace zkl {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(Distribution d) noexcept {
  return d == Distribution::Gaussian ? "gaussian" : "rademacher";
}

Distribution parse_distribution(std::string_view name) {
  if (name == "gaussian") return Distribution::Gaussian;
  if (name == "rademacher") return Distribution::Rademacher;
  throw InvalidArgument("unknown distribution '" + std::string(name) + "'");
}

std::uint64_t hash_key(const StreamKey& key) noexcept {
  std::uint64_t h = splitmix64(key.master_seed);
  h = splitmix64(h ^ key.step);
  h = splitmix64(h ^ (key.perturbation * 0xd6e8feb86659fd93ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(key.purpose));
  return h;
}

Stream::Stream(const StreamKey& key) : engine_(hash_key(key)) {}

double Stream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Stream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double x, y, s;
  do {
    x = 2.0 * uniform() - 1.0;
    y = 2.0 * uniform() - 1.0;
    s = x * x + y * y;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  cached_normal_ = y * f;
  has_cached_normal_ = true;
  return x * f;
}

double Stream::sign() {
  if (sign_bits_left_ == 0) {
    sign_bits_ = engine_();
    sign_bits_left_ = 64;
  }
  const double s = (sign_bits_ & 1ULL) ? 1.0 : -1.0;
  sign_bits_ >>= 1;
  --sign_bits_left_;
  return s;
}

std::uint64_t Stream::below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("Stream::below: n must be > 0");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~0ULL - (~0ULL % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

void Stream::fill(std::span<double> out, Distribution dist) {
  if (dist == Distribution::Gaussian) {
    for (double& v : out) v = normal();
  } else {
    for (double& v : out) v = sign();
  }
}

Vector sample_perturbation(const StreamKey& key, std::size_t d, Distribution dist) {
  if (d == 0) throw InvalidArgument("sample_perturbation: dimension must be >= 1");
  Vector u(d);
  Stream(key).fill(u, dist);
  return u;
}

Matrix build_projection(std::uint64_t master_seed, std::uint64_t step, std::size_t d, std::size_t P,
                        Distribution dist) {
  if (d == 0) throw InvalidArgument("build_projection: dimension must be >= 1");
  if (P == 0) throw InvalidArgument("build_projection: P must be >= 1");
  Matrix U(d, P);
  const double scale = 1.0 / std::sqrt(static_cast<double>(P));
  Vector column(d);
  for (std::size_t p = 0; p < P; ++p) {
    Stream(StreamKey{master_seed, step, p, Purpose::Perturbation}).fill(column, dist);
    for (std::size_t k = 0; k < d; ++k) U(k, p) = column[k] * scale;
  }
  return U;
}

}  // namespace zkl
