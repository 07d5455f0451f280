#pragma once

#include <cmath>
#include <cstdint>

namespace koow {

/// Deterministic 64-bit generator (splitmix64). Used everywhere randomness is
/// needed so that outputs are byte-identical across platforms and worker
/// counts; the standard <random> distributions are implementation-defined and
/// would break that contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(finalize(seed)) {}

  /// Stream `stream` of a master seed. Replicate b of a bootstrap or
  /// simulation run uses derive(seed, b) so results depend only on (seed, b),
  /// never on execution order.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(finalize(seed) + 0x9E3779B97F4A7C15ULL * (stream + 1));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return finalize(state_);
  }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log() argument.
  double uniform01_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per draw.
  double normal() {
    const double u1 = uniform01_open();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Uniform integer in [0, bound). Modulo bias is ~bound/2^64, irrelevant here.
  std::uint64_t uniform_below(std::uint64_t bound) { return next_u64() % bound; }

 private:
  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace koow
