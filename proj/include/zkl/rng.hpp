#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

#include "zkl/linalg.hpp"

namespace zkl {

enum class Distribution { Gaussian, Rademacher };

std::string_view to_string(Distribution d) noexcept;
/// Accepts "gaussian" / "rademacher" (case-sensitive). Throws InvalidArgument otherwise.
Distribution parse_distribution(std::string_view name);

/// Namespaces for independent streams drawn from one master seed.
enum class Purpose : std::uint32_t {
  Perturbation = 0,
  ParamInit = 1,
  DataGen = 2,
  DataOrder = 3,
  MonteCarlo = 4,
  Points = 5,
};

struct StreamKey {
  std::uint64_t master_seed = 0;
  std::uint64_t step = 0;
  std::uint64_t perturbation = 0;
  Purpose purpose = Purpose::Perturbation;
};

/// Stable 64-bit hash of a key (splitmix64 finaliser chained over the fields).
std::uint64_t hash_key(const StreamKey& key) noexcept;

/// One random stream. The engine is std::mt19937_64 seeded with hash_key(key);
/// uniforms use the top 53 bits, normals use the Marsaglia polar method with the
/// second variate cached. Both are fixed so recorded seeds replay bit-exactly.
/// Not thread-safe; derive one stream per thread/key.
class Stream {
 public:
  explicit Stream(const StreamKey& key);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double normal();
  /// -1 or +1, one bit of the stream per sign.
  double sign();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  void fill(std::span<double> out, Distribution dist);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
  std::uint64_t sign_bits_ = 0;
  int sign_bits_left_ = 0;
};

/// Length-d draw of `dist` from the stream identified by key. Throws InvalidArgument for d == 0.
Vector sample_perturbation(const StreamKey& key, std::size_t d, Distribution dist);

/// d×P matrix whose column p is sample_perturbation({seed, step, p, Perturbation}, d, dist) / √P.
Matrix build_projection(std::uint64_t master_seed, std::uint64_t step, std::size_t d, std::size_t P,
                        Distribution dist);

}  // namespace zkl
